//! Scene description, benchmark tetrahedral meshes of a ball with an
//! optional ball-shaped cavity, and boundary patches.

use crate::error::{invalid, Error, Result};
use crate::probe::Ball;
use crate::vec3::{self, V3};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

/// Ω = outer ball, D = optional cavity ball, B = probe ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub outer: Ball,
    pub cavity: Option<Ball>,
    pub probe_ball: Ball,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for b in [Some(self.outer), self.cavity, Some(self.probe_ball)].into_iter().flatten() {
            if !(b.radius > 0.0) || b.center.iter().any(|v| !v.is_finite()) {
                return invalid("ball radii must be positive and centers finite");
            }
        }
        if let Some(d) = self.cavity {
            if !(vec3::dist(d.center, self.outer.center) + d.radius < self.outer.radius) {
                return invalid("cavity must lie strictly inside the outer ball");
            }
        }
        let (_, d_ob) = self.distances();
        if !(d_ob > 0.0) {
            return invalid("probe ball must be disjoint from the closure of the body");
        }
        Ok(())
    }

    fn distances(&self) -> (Option<f64>, f64) {
        let b = self.probe_ball;
        let d_db = self.cavity.map(|d| vec3::dist(d.center, b.center) - d.radius - b.radius);
        let d_ob = vec3::dist(self.outer.center, b.center) - self.outer.radius - b.radius;
        (d_db, d_ob)
    }
}

/// Exact `(dist(D,B), dist(Ω,B))` for ball-described sets. `dist(D,B)` is
/// `None` without a cavity.
pub fn set_distance(scene: &Scene) -> Result<(Option<f64>, f64)> {
    let (d_db, d_ob) = scene.distances();
    if !(d_ob > 0.0) {
        return invalid(format!("dist(Omega, B) = {d_ob} is not positive: sets overlap"));
    }
    if let Some(d) = d_db {
        if !(d > 0.0) {
            return invalid(format!("dist(D, B) = {d} is not positive: sets overlap"));
        }
    }
    Ok((d_db, d_ob))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Outer = 1,
    Cavity = 2,
}

impl Tag {
    pub fn code(&self) -> u8 {
        *self as u8
    }

    pub fn from_code(c: u8) -> Option<Tag> {
        match c {
            1 => Some(Tag::Outer),
            2 => Some(Tag::Cavity),
            _ => None,
        }
    }
}

/// Tetrahedral mesh of Ω \ D̄. Facet orientation gives the normal by the
/// right-hand rule: out of Ω on the outer boundary, into D on the cavity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<V3>,
    pub tets: Vec<[usize; 4]>,
    pub facets: Vec<([usize; 3], Tag)>,
}

pub fn tet_volume(a: V3, b: V3, c: V3, d: V3) -> f64 {
    vec3::det3(vec3::sub(b, a), vec3::sub(c, a), vec3::sub(d, a)) / 6.0
}

/// Euclidean distance from `p` to the closed triangle `abc`.
pub fn point_triangle_distance(p: V3, a: V3, b: V3, c: V3) -> f64 {
    let (ab, ac, ap) = (vec3::sub(b, a), vec3::sub(c, a), vec3::sub(p, a));
    let (d1, d2) = (vec3::dot(ab, ap), vec3::dot(ac, ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return vec3::dist(p, a);
    }
    let bp = vec3::sub(p, b);
    let (d3, d4) = (vec3::dot(ab, bp), vec3::dot(ac, bp));
    if d3 >= 0.0 && d4 <= d3 {
        return vec3::dist(p, b);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return vec3::dist(p, vec3::add(a, vec3::scale(ab, v)));
    }
    let cp = vec3::sub(p, c);
    let (d5, d6) = (vec3::dot(ab, cp), vec3::dot(ac, cp));
    if d6 >= 0.0 && d5 <= d6 {
        return vec3::dist(p, c);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return vec3::dist(p, vec3::add(a, vec3::scale(ac, w)));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return vec3::dist(p, vec3::add(b, vec3::scale(vec3::sub(c, b), w)));
    }
    let denom = 1.0 / (va + vb + vc);
    let (v, w) = (vb * denom, vc * denom);
    vec3::dist(p, vec3::add(a, vec3::add(vec3::scale(ab, v), vec3::scale(ac, w))))
}

fn sorted3(f: [usize; 3]) -> [usize; 3] {
    let mut s = f;
    s.sort_unstable();
    s
}

const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

impl Mesh {
    pub fn volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t];
        tet_volume(self.nodes[a], self.nodes[b], self.nodes[c], self.nodes[d])
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.volume(t)).sum()
    }

    /// Area-weighted normal (length = 2·area).
    fn facet_cross(&self, f: usize) -> V3 {
        let [a, b, c] = self.facets[f].0;
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        vec3::cross(vec3::sub(pb, pa), vec3::sub(pc, pa))
    }

    pub fn facet_area(&self, f: usize) -> f64 {
        0.5 * vec3::norm(self.facet_cross(f))
    }

    pub fn facet_normal(&self, f: usize) -> V3 {
        vec3::normalize(self.facet_cross(f))
    }

    pub fn facet_centroid(&self, f: usize) -> V3 {
        let [a, b, c] = self.facets[f].0;
        vec3::scale(vec3::add(vec3::add(self.nodes[a], self.nodes[b]), self.nodes[c]), 1.0 / 3.0)
    }

    /// Whether `x` lies in the closure of some tetrahedron.
    pub fn contains_point(&self, x: V3) -> bool {
        self.tets.iter().any(|&[a, b, c, d]| {
            let p = [self.nodes[a], self.nodes[b], self.nodes[c], self.nodes[d]];
            let v = tet_volume(p[0], p[1], p[2], p[3]);
            let tol = -1e-12 * v.abs();
            tet_volume(x, p[1], p[2], p[3]) * v.signum() >= tol
                && tet_volume(p[0], x, p[2], p[3]) * v.signum() >= tol
                && tet_volume(p[0], p[1], x, p[3]) * v.signum() >= tol
                && tet_volume(p[0], p[1], p[2], x) * v.signum() >= tol
        })
    }

    /// Distance from `x` to the nearest boundary facet.
    pub fn boundary_distance(&self, x: V3) -> f64 {
        self.facets
            .iter()
            .map(|(f, _)| point_triangle_distance(x, self.nodes[f[0]], self.nodes[f[1]], self.nodes[f[2]]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn count_tag(&self, tag: Tag) -> usize {
        self.facets.iter().filter(|f| f.1 == tag).count()
    }

    pub fn has_cavity(&self) -> bool {
        self.count_tag(Tag::Cavity) > 0
    }

    /// Index bounds, positive volumes, boundary facets matching the tet
    /// boundary exactly with outward orientation, and watertight tag sets.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (t, tet) in self.tets.iter().enumerate() {
            if tet.iter().any(|&i| i >= n) {
                return Err(Error::Mesh(format!("tet {t}: dangling index")));
            }
            let v = self.volume(t);
            if !(v > 0.0) {
                return Err(Error::Mesh(format!("tet {t}: non-positive volume {v}")));
            }
        }
        // boundary faces of the tet complex with their opposite vertex
        let mut faces: BTreeMap<[usize; 3], (usize, usize)> = BTreeMap::new();
        for (t, tet) in self.tets.iter().enumerate() {
            for (k, lf) in TET_FACES.iter().enumerate() {
                let key = sorted3([tet[lf[0]], tet[lf[1]], tet[lf[2]]]);
                let e = faces.entry(key).or_insert((0, t * 4 + k));
                e.0 += 1;
                if e.0 > 2 {
                    return Err(Error::Mesh(format!("face {key:?} shared by more than two tets")));
                }
            }
        }
        let mut seen = BTreeMap::new();
        for (f, (tri, _)) in self.facets.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::Mesh(format!("facet {f}: dangling index")));
            }
            let key = sorted3(*tri);
            match faces.get(&key) {
                Some(&(1, tk)) => {
                    let opp = self.nodes[self.tets[tk / 4][tk % 4]];
                    let c = self.facet_centroid(f);
                    if vec3::dot(self.facet_cross(f), vec3::sub(c, opp)) <= 0.0 {
                        return Err(Error::Mesh(format!("facet {f}: normal points into the mesh")));
                    }
                }
                _ => return Err(Error::Mesh(format!("facet {f} is not on the boundary of exactly one tet"))),
            }
            if seen.insert(key, f).is_some() {
                return Err(Error::Mesh(format!("facet {f} duplicated")));
            }
        }
        let untagged = faces.iter().filter(|(k, v)| v.0 == 1 && !seen.contains_key(*k)).count();
        if untagged > 0 {
            return Err(Error::Mesh(format!("{untagged} boundary faces are untagged")));
        }
        // every boundary edge in exactly two facets of the same tag
        let mut edges: BTreeMap<(usize, usize, Tag), usize> = BTreeMap::new();
        for (tri, tag) in &self.facets {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b), *tag)).or_insert(0) += 1;
            }
        }
        if let Some(((a, b, tag), c)) = edges.iter().find(|(_, &c)| c != 2) {
            return Err(Error::Mesh(format!("edge ({a},{b}) appears in {c} {tag:?} facets")));
        }
        if self.count_tag(Tag::Outer) == 0 {
            return Err(Error::Mesh("mesh has no OUTER facets".into()));
        }
        Ok(())
    }

    pub fn min_edge_length(&self) -> f64 {
        let mut m = f64::INFINITY;
        for tet in &self.tets {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    m = m.min(vec3::dist(self.nodes[tet[i]], self.nodes[tet[j]]));
                }
            }
        }
        m
    }

    pub fn max_edge_length(&self) -> f64 {
        let mut m: f64 = 0.0;
        for tet in &self.tets {
            for i in 0..4 {
                for j in (i + 1)..4 {
                    m = m.max(vec3::dist(self.nodes[tet[i]], self.nodes[tet[j]]));
                }
            }
        }
        m
    }
}

/// Unit icosphere: `10·4^level + 2` vertices, `20·4^level` outward triangles.
pub fn icosphere(level: u32) -> (Vec<V3>, Vec<[usize; 3]>) {
    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut verts: Vec<V3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| vec3::normalize(*v))
    .collect();
    let mut tris: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<V3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(vec3::normalize(vec3::add(verts[a], verts[b])));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

/// Angular edge length of the level-`level` icosphere (radians, approx.).
fn angular_step(level: u32) -> f64 {
    1.05 / libm::pow(2.0, level as f64)
}

/// Split the prism between triangle `bot` and its copy `top` (same vertex
/// order) into three positive tets. Quad faces are split from the
/// smaller-index bottom vertex to the larger-index top vertex, so adjacent
/// prisms agree.
fn push_prism(tets: &mut Vec<[usize; 4]>, nodes: &[V3], bot: [usize; 3], top: [usize; 3], key: [usize; 3]) {
    let mut ord = [0usize, 1, 2];
    ord.sort_by_key(|&i| key[i]);
    let (a0, a1, a2) = (bot[ord[0]], bot[ord[1]], bot[ord[2]]);
    let (b0, b1, b2) = (top[ord[0]], top[ord[1]], top[ord[2]]);
    for t in [[a0, a1, a2, b2], [a0, a1, b1, b2], [a0, b0, b1, b2]] {
        push_oriented(tets, nodes, t);
    }
}

fn push_oriented(tets: &mut Vec<[usize; 4]>, nodes: &[V3], mut t: [usize; 4]) {
    if tet_volume(nodes[t[0]], nodes[t[1]], nodes[t[2]], nodes[t[3]]) < 0.0 {
        t.swap(2, 3);
    }
    tets.push(t);
}

/// Benchmark mesh of Ω \ D̄: icosphere shells between the cavity sphere and
/// the outer sphere, with geometric radial grading so that layers are about
/// half as thick as the tangential edge length. Without a cavity the full
/// ball is meshed with uniform shells around a centre vertex.
pub fn generate_benchmark_mesh(scene: &Scene, level: u32) -> Result<Mesh> {
    scene.validate()?;
    let (dirs, tris) = icosphere(level);
    let nd = dirs.len();
    let th = angular_step(level);
    let outer = scene.outer;
    let mut nodes = Vec::new();
    let mut tets = Vec::new();
    let mut facets = Vec::new();
    match scene.cavity {
        Some(d) => {
            let offset = vec3::dist(d.center, outer.center);
            let gap = outer.radius - offset - d.radius;
            let ratio = (d.radius + gap) / d.radius;
            let fit = 2.0 * libm::log(ratio) / th;
            if fit < 2.0 {
                return Err(Error::Mesh(format!(
                    "cavity too close to the outer boundary: {fit:.2} radial layers fit at level {level}, need 2"
                )));
            }
            let layers = libm::ceil(2.0 * libm::log(outer.radius / d.radius) / th).max(2.0) as usize;
            let q = outer.radius / d.radius;
            for k in 0..=layers {
                let rk = d.radius * libm::pow(q, k as f64 / layers as f64);
                let t = (rk - d.radius) / (outer.radius - d.radius);
                for w in &dirs {
                    let inner = vec3::add(d.center, vec3::scale(*w, d.radius));
                    let out = vec3::add(outer.center, vec3::scale(*w, outer.radius));
                    nodes.push(vec3::add(vec3::scale(inner, 1.0 - t), vec3::scale(out, t)));
                }
            }
            for k in 0..layers {
                for tri in &tris {
                    let bot = [k * nd + tri[0], k * nd + tri[1], k * nd + tri[2]];
                    let top = [bot[0] + nd, bot[1] + nd, bot[2] + nd];
                    push_prism(&mut tets, &nodes, bot, top, *tri);
                }
            }
            for tri in &tris {
                facets.push(([tri[0], tri[2], tri[1]], Tag::Cavity));
                let o = layers * nd;
                facets.push(([o + tri[0], o + tri[1], o + tri[2]], Tag::Outer));
            }
        }
        None => {
            let layers = libm::ceil(2.0 / th) as usize;
            nodes.push(outer.center);
            for k in 1..=layers {
                let r = outer.radius * k as f64 / layers as f64;
                for w in &dirs {
                    nodes.push(vec3::add(outer.center, vec3::scale(*w, r)));
                }
            }
            let shell = |k: usize, i: usize| 1 + (k - 1) * nd + i;
            for tri in &tris {
                push_oriented(&mut tets, &nodes, [0, shell(1, tri[0]), shell(1, tri[1]), shell(1, tri[2])]);
            }
            for k in 1..layers {
                for tri in &tris {
                    let bot = [shell(k, tri[0]), shell(k, tri[1]), shell(k, tri[2])];
                    let top = [shell(k + 1, tri[0]), shell(k + 1, tri[1]), shell(k + 1, tri[2])];
                    push_prism(&mut tets, &nodes, bot, top, *tri);
                }
            }
            for tri in &tris {
                facets.push(([shell(layers, tri[0]), shell(layers, tri[1]), shell(layers, tri[2])], Tag::Outer));
            }
        }
    }
    let mesh = Mesh { nodes, tets, facets };
    mesh.validate()?;
    Ok(mesh)
}

/// OUTER facets whose centroid lies within `m` of the ball: `|x−p| − η < m`.
pub fn boundary_patch(mesh: &Mesh, ball: &Ball, m: f64) -> Result<Vec<usize>> {
    if !(m > 0.0) {
        return invalid("patch size M must be positive");
    }
    Ok((0..mesh.facets.len())
        .filter(|&f| mesh.facets[f].1 == Tag::Outer)
        .filter(|&f| vec3::dist(mesh.facet_centroid(f), ball.center) - ball.radius < m)
        .collect())
}
