//! P1 finite element operators for the coupled displacement–temperature
//! system. Unknowns are interleaved per node as `[w_x, w_y, w_z, Ξ]`.
//!
//! For a Laplace parameter `τ` the system reads
//!
//! ```text
//! (K + ρτ²M) w + m Dᵀ Ξ            = elastic load
//! −mθ₀τ D w   + (k K_h + cτ M) Ξ   = heat load
//! ```
//!
//! with `K` the isotropic stiffness, `M` the scalar mass matrix and
//! `D_{a,(b,j)} = ∫ φ_a ∂_j φ_b`. Scaling the heat rows by `−1/(θ₀τ)` makes
//! the matrix symmetric and quasi-definite.

use crate::error::{invalid, Result};
use crate::geometry::{Mesh, Tag};
use crate::material::Material;
use crate::quadrature::{TetRule, TriRule};
use crate::sparse::Csr;
use crate::vec3::{self, M3, V3};
use alloc::vec::Vec;

pub const NDOF: usize = 4;

#[inline]
pub fn dof(node: usize, comp: usize) -> usize {
    NDOF * node + comp
}

/// Volume and barycentric gradients of a tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct TetGeom {
    pub vol: f64,
    pub grads: [V3; 4],
}

pub fn tet_geom(mesh: &Mesh, t: usize) -> TetGeom {
    let [a, b, c, d] = mesh.tets[t];
    let p = [mesh.nodes[a], mesh.nodes[b], mesh.nodes[c], mesh.nodes[d]];
    let e1 = vec3::sub(p[1], p[0]);
    let e2 = vec3::sub(p[2], p[0]);
    let e3 = vec3::sub(p[3], p[0]);
    let det = vec3::det3(e1, e2, e3);
    // rows of the inverse Jacobian are the gradients of λ1..λ3
    let g1 = vec3::scale(vec3::cross(e2, e3), 1.0 / det);
    let g2 = vec3::scale(vec3::cross(e3, e1), 1.0 / det);
    let g3 = vec3::scale(vec3::cross(e1, e2), 1.0 / det);
    let g0 = vec3::scale(vec3::add(vec3::add(g1, g2), g3), -1.0);
    TetGeom { vol: det / 6.0, grads: [g0, g1, g2, g3] }
}

/// Node adjacency (without self loops), sorted.
pub fn node_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj = alloc::vec![Vec::new(); mesh.nodes.len()];
    for tet in &mesh.tets {
        for &a in tet {
            for &b in tet {
                if a != b {
                    adj[a].push(b);
                }
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

/// τ-independent assembled operators sharing one sparsity pattern.
#[derive(Debug, Clone)]
pub struct Operators {
    pub n_nodes: usize,
    pattern: Csr,
    /// `K` with the material's `μ, λ`
    stiff: Vec<f64>,
    /// `M` on the elastic components
    mass_el: Vec<f64>,
    /// `Dᵀ` entries in the elastic rows
    coup_el: Vec<f64>,
    /// `D` entries in the heat rows
    coup_heat: Vec<f64>,
    /// `K_h` (unit conductivity)
    stiff_heat: Vec<f64>,
    /// `M` on the heat component
    mass_heat: Vec<f64>,
    pub material: Material,
}

impl Operators {
    pub fn assemble(mesh: &Mesh, mat: &Material) -> Operators {
        let nn = mesh.nodes.len();
        let mut nbrs = node_adjacency(mesh);
        for (a, l) in nbrs.iter_mut().enumerate() {
            l.push(a);
            l.sort_unstable();
        }
        let n = NDOF * nn;
        let mut row_ptr = alloc::vec![0usize; n + 1];
        for a in 0..nn {
            for c in 0..NDOF {
                row_ptr[dof(a, c) + 1] = NDOF * nbrs[a].len();
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col = alloc::vec![0usize; row_ptr[n]];
        for a in 0..nn {
            for c in 0..NDOF {
                let base = row_ptr[dof(a, c)];
                for (r, &b) in nbrs[a].iter().enumerate() {
                    for c2 in 0..NDOF {
                        col[base + NDOF * r + c2] = dof(b, c2);
                    }
                }
            }
        }
        let nnz = col.len();
        let pattern = Csr { n, row_ptr, col, val: alloc::vec![0.0; nnz] };
        let mut ops = Operators {
            n_nodes: nn,
            stiff: alloc::vec![0.0; nnz],
            mass_el: alloc::vec![0.0; nnz],
            coup_el: alloc::vec![0.0; nnz],
            coup_heat: alloc::vec![0.0; nnz],
            stiff_heat: alloc::vec![0.0; nnz],
            mass_heat: alloc::vec![0.0; nnz],
            pattern,
            material: *mat,
        };
        let (mu, lam) = (mat.mu, mat.lambda);
        for t in 0..mesh.tets.len() {
            let tet = mesh.tets[t];
            let g = tet_geom(mesh, t);
            let v = g.vol;
            for (ia, &a) in tet.iter().enumerate() {
                for (ib, &b) in tet.iter().enumerate() {
                    let rank = nbrs[a].binary_search(&b).unwrap();
                    let (ga, gb) = (g.grads[ia], g.grads[ib]);
                    let m_ab = v * if ia == ib { 0.1 } else { 0.05 };
                    let dot = vec3::dot(ga, gb);
                    for i in 0..3 {
                        let row = ops.pattern.row_ptr[dof(a, i)] + NDOF * rank;
                        for j in 0..3 {
                            let k = v * (if i == j { mu * dot } else { 0.0 } + mu * ga[j] * gb[i] + lam * ga[i] * gb[j]);
                            ops.stiff[row + j] += k;
                        }
                        ops.mass_el[row + i] += m_ab;
                        // ∫ φ_b ∂_i φ_a
                        ops.coup_el[row + 3] += v * 0.25 * ga[i];
                    }
                    let row = ops.pattern.row_ptr[dof(a, 3)] + NDOF * rank;
                    for j in 0..3 {
                        // ∫ φ_a ∂_j φ_b
                        ops.coup_heat[row + j] += v * 0.25 * gb[j];
                    }
                    ops.stiff_heat[row + 3] += v * dot;
                    ops.mass_heat[row + 3] += m_ab;
                }
            }
        }
        ops
    }

    pub fn n_dofs(&self) -> usize {
        self.pattern.n
    }

    fn combine(&self, c: [f64; 6]) -> Csr {
        let mut a = self.pattern.clone();
        for k in 0..a.val.len() {
            a.val[k] = c[0] * self.stiff[k]
                + c[1] * self.mass_el[k]
                + c[2] * self.coup_el[k]
                + c[3] * self.coup_heat[k]
                + c[4] * self.stiff_heat[k]
                + c[5] * self.mass_heat[k];
        }
        a
    }

    /// Coupled system at Laplace parameter `τ` (heat rows unscaled).
    pub fn system(&self, tau: f64) -> Csr {
        let m = &self.material;
        self.combine([1.0, m.rho * tau * tau, m.m, -m.m * m.theta0 * tau, m.k, m.c * tau])
    }

    /// Row scaling that symmetrizes [`Operators::system`].
    pub fn symmetrizer(&self, tau: f64) -> Vec<f64> {
        let s = -1.0 / (self.material.theta0 * tau);
        (0..self.n_dofs()).map(|i| if i % NDOF == 3 { s } else { 1.0 }).collect()
    }

    /// `(K + ρτ²M)` energy `uᵀ(K + ρτ²M)u` of a nodal displacement.
    pub fn elastic_energy(&self, u: &[V3], tau: f64) -> f64 {
        let c = [1.0, self.material.rho * tau * tau, 0.0, 0.0, 0.0, 0.0];
        self.quadratic(c, &pack(u, None))
    }

    /// `ϑᵀ(k K_h + cτ M)ϑ` of a nodal temperature.
    pub fn thermal_energy(&self, th: &[f64], tau: f64) -> f64 {
        let c = [0.0, 0.0, 0.0, 0.0, self.material.k, self.material.c * tau];
        let z = alloc::vec![[0.0; 3]; th.len()];
        self.quadratic(c, &pack(&z, Some(th)))
    }

    /// Stiffness and mass quadratic forms `(uᵀKu, uᵀMu)` (ρ not applied).
    pub fn elastic_parts(&self, u: &[V3]) -> (f64, f64) {
        let x = pack(u, None);
        (self.quadratic([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &x), self.quadratic([0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &x))
    }

    fn quadratic(&self, c: [f64; 6], x: &[f64]) -> f64 {
        let a = self.combine(c);
        a.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// A single operator block: 0 stiffness, 1 elastic mass, 2 elastic-row
    /// coupling, 3 heat-row coupling, 4 heat stiffness, 5 heat mass.
    pub fn block(&self, which: usize) -> Csr {
        let mut c = [0.0; 6];
        c[which] = 1.0;
        self.combine(c)
    }
}

/// Interleave nodal displacement and temperature into a dof vector.
pub fn pack(u: &[V3], th: Option<&[f64]>) -> Vec<f64> {
    let mut x = alloc::vec![0.0; NDOF * u.len()];
    for (a, w) in u.iter().enumerate() {
        x[dof(a, 0)] = w[0];
        x[dof(a, 1)] = w[1];
        x[dof(a, 2)] = w[2];
        if let Some(t) = th {
            x[dof(a, 3)] = t[a];
        }
    }
    x
}

pub fn unpack(x: &[f64]) -> (Vec<V3>, Vec<f64>) {
    let n = x.len() / NDOF;
    let u = (0..n).map(|a| [x[dof(a, 0)], x[dof(a, 1)], x[dof(a, 2)]]).collect();
    let t = (0..n).map(|a| x[dof(a, 3)]).collect();
    (u, t)
}

/// `∫ e·ψ + ∫ h χ` over the facets with tag `tag`, with
/// `f(x, ν) = (e, h)` evaluated at the rule's points.
pub fn facet_load<F>(mesh: &Mesh, tag: Tag, rule: &TriRule, n_dofs: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(V3, V3) -> Result<(V3, f64)>,
{
    let mut b = alloc::vec![0.0; n_dofs];
    for fi in 0..mesh.facets.len() {
        let (tri, t) = mesh.facets[fi];
        if t != tag {
            continue;
        }
        let area = mesh.facet_area(fi);
        let nu = mesh.facet_normal(fi);
        let p = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary3(&p, bc);
            let (e, h) = f(x, nu)?;
            for k in 0..3 {
                let s = area * w * bc[k];
                for i in 0..3 {
                    b[dof(tri[k], i)] += s * e[i];
                }
                b[dof(tri[k], 3)] += s * h;
            }
        }
    }
    Ok(b)
}

/// `∫ e·ψ + ∫ h χ` over all tets, `f(x) = (e, h)`.
pub fn volume_load<F>(mesh: &Mesh, rule: &TetRule, n_dofs: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(V3) -> Result<(V3, f64)>,
{
    let mut b = alloc::vec![0.0; n_dofs];
    for t in 0..mesh.tets.len() {
        let tet = mesh.tets[t];
        let vol = mesh.volume(t);
        let p = [mesh.nodes[tet[0]], mesh.nodes[tet[1]], mesh.nodes[tet[2]], mesh.nodes[tet[3]]];
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary4(&p, bc);
            let (e, h) = f(x)?;
            for k in 0..4 {
                let s = vol * w * bc[k];
                for i in 0..3 {
                    b[dof(tet[k], i)] += s * e[i];
                }
                b[dof(tet[k], 3)] += s * h;
            }
        }
    }
    Ok(b)
}

/// `Σ_tets ∫ f(x, u_h(x), ∇u_h, ϑ_h, ∇ϑ_h)` for nodal fields.
pub fn volume_integral<F>(mesh: &Mesh, rule: &TetRule, u: &[V3], th: &[f64], mut f: F) -> Result<f64>
where
    F: FnMut(V3, V3, &M3, f64, V3) -> Result<f64>,
{
    let mut total = 0.0;
    for t in 0..mesh.tets.len() {
        let tet = mesh.tets[t];
        let g = tet_geom(mesh, t);
        let p = [mesh.nodes[tet[0]], mesh.nodes[tet[1]], mesh.nodes[tet[2]], mesh.nodes[tet[3]]];
        let mut gu = [[0.0; 3]; 3];
        let mut gt = [0.0; 3];
        for k in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    gu[i][j] += u[tet[k]][i] * g.grads[k][j];
                }
                gt[i] += th[tet[k]] * g.grads[k][i];
            }
        }
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary4(&p, bc);
            let mut uh = [0.0; 3];
            let mut th_h = 0.0;
            for k in 0..4 {
                for i in 0..3 {
                    uh[i] += bc[k] * u[tet[k]][i];
                }
                th_h += bc[k] * th[tet[k]];
            }
            total += g.vol * w * f(x, uh, &gu, th_h, gt)?;
        }
    }
    Ok(total)
}

/// `Σ_facets ∫ f(x, ν, u_h(x), ϑ_h(x))` over the given facets.
pub fn facet_integral<F>(mesh: &Mesh, facets: &[usize], rule: &TriRule, u: &[V3], th: &[f64], mut f: F) -> Result<f64>
where
    F: FnMut(V3, V3, V3, f64) -> Result<f64>,
{
    let mut total = 0.0;
    for &fi in facets {
        let tri = mesh.facets[fi].0;
        let area = mesh.facet_area(fi);
        let nu = mesh.facet_normal(fi);
        let p = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary3(&p, bc);
            let mut uh = [0.0; 3];
            let mut th_h = 0.0;
            for k in 0..3 {
                for i in 0..3 {
                    uh[i] += bc[k] * u[tri[k]][i];
                }
                th_h += bc[k] * th[tri[k]];
            }
            total += area * w * f(x, nu, uh, th_h)?;
        }
    }
    Ok(total)
}

pub fn bary3(p: &[V3; 3], bc: &[f64; 3]) -> V3 {
    let mut x = [0.0; 3];
    for k in 0..3 {
        for i in 0..3 {
            x[i] += bc[k] * p[k][i];
        }
    }
    x
}

pub fn bary4(p: &[V3; 4], bc: &[f64; 4]) -> V3 {
    let mut x = [0.0; 3];
    for k in 0..4 {
        for i in 0..3 {
            x[i] += bc[k] * p[k][i];
        }
    }
    x
}

/// `(‖u_h − u‖_{L²}, ‖u‖_{L²}, |u_h − u|_{H¹}, |u|_{H¹})` over all four
/// components for an exact field `exact(x) = (w, ∇w, Ξ, ∇Ξ)`.
pub fn field_errors<F>(mesh: &Mesh, u: &[V3], th: &[f64], exact: F) -> Result<[f64; 4]>
where
    F: Fn(V3) -> (V3, M3, f64, V3),
{
    if u.len() != mesh.nodes.len() || th.len() != mesh.nodes.len() {
        return invalid("field length does not match the mesh");
    }
    let rule = TetRule::fourteen_point();
    let mut acc = [0.0; 4];
    for t in 0..mesh.tets.len() {
        let tet = mesh.tets[t];
        let g = tet_geom(mesh, t);
        let p = [mesh.nodes[tet[0]], mesh.nodes[tet[1]], mesh.nodes[tet[2]], mesh.nodes[tet[3]]];
        let mut gu = [[0.0; 3]; 3];
        let mut gt = [0.0; 3];
        for k in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    gu[i][j] += u[tet[k]][i] * g.grads[k][j];
                }
                gt[i] += th[tet[k]] * g.grads[k][i];
            }
        }
        for (bc, w) in rule.points.iter().zip(&rule.weights) {
            let x = bary4(&p, bc);
            let (we, ge, te, gte) = exact(x);
            let mut d2 = 0.0;
            let mut e2 = 0.0;
            for i in 0..3 {
                let uh: f64 = (0..4).map(|k| bc[k] * u[tet[k]][i]).sum();
                d2 += (uh - we[i]) * (uh - we[i]);
                e2 += we[i] * we[i];
            }
            let th_h: f64 = (0..4).map(|k| bc[k] * th[tet[k]]).sum();
            d2 += (th_h - te) * (th_h - te);
            e2 += te * te;
            let mut h2 = 0.0;
            let mut hn = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    h2 += (gu[i][j] - ge[i][j]) * (gu[i][j] - ge[i][j]);
                    hn += ge[i][j] * ge[i][j];
                }
                h2 += (gt[i] - gte[i]) * (gt[i] - gte[i]);
                hn += gte[i] * gte[i];
            }
            let s = g.vol * w;
            acc[0] += s * d2;
            acc[1] += s * e2;
            acc[2] += s * h2;
            acc[3] += s * hn;
        }
    }
    Ok(acc.map(libm::sqrt))
}
