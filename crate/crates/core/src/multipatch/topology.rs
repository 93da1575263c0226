//! Topology of a planar multi-patch domain: interfaces, boundary edges and
//! vertex fans, each with the reparameterizations that put the patches into
//! a common standard position.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{BilinearPatch, Point};
use super::symmetry::SquareSymmetry;
use crate::error::{Error, Result};

/// Relative corner-coincidence tolerance (times the bounding-box diagonal).
pub const CORNER_TOL: f64 = 1e-9;

/// Local edges: 0 is `ξ2 = 0`, 1 is `ξ1 = 1`, 2 is `ξ2 = 1`, 3 is `ξ1 = 0`.
/// Edge `e` runs from corner `e` to corner `e + 1` (mod 4).
pub fn edge_corners(edge: usize) -> (usize, usize) {
    (edge, (edge + 1) % 4)
}

fn edge_between(a: usize, b: usize) -> Option<usize> {
    if (a + 1) % 4 == b {
        Some(a)
    } else if (b + 1) % 4 == a {
        Some(b)
    } else {
        None
    }
}

/// An edge incident to a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeRef {
    Interface(usize),
    Boundary { patch: usize, edge: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceSide {
    pub patch: usize,
    pub edge: usize,
    /// Standardized `(u, v)` to native parameters; the interface is `u = 0`.
    pub symmetry: SquareSymmetry,
}

/// A common edge of two patches. `sides[0]` is the side whose standardized
/// parameterization reverses orientation, `sides[1]` the other one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub sides: [InterfaceSide; 2],
    /// Vertex positions of the standardized `v = 0` and `v = 1` ends.
    pub ends: [Point; 2],
}

impl Interface {
    pub fn side_of(&self, patch: usize) -> Option<usize> {
        self.sides.iter().position(|s| s.patch == patch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanEntry {
    pub patch: usize,
    /// Native corner index sitting at the vertex.
    pub corner: usize,
    /// Orientation-preserving map with `F(sym(0, 0))` at the vertex.
    pub symmetry: SquareSymmetry,
    /// Edge `sym(t, 0)`.
    pub lower: EdgeRef,
    /// Edge `sym(0, t)`.
    pub upper: EdgeRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: Point,
    /// Patches around the vertex in counterclockwise order.
    pub fan: Vec<FanEntry>,
    /// Number of incident edges.
    pub valency: usize,
    pub boundary: bool,
}

impl Vertex {
    /// Fan edges `Γ^(0), …, Γ^(ν̄-1)`: the lower edge of each fan patch,
    /// followed by the upper edge of the last one at a boundary vertex.
    pub fn fan_edges(&self) -> Vec<EdgeRef> {
        let mut e: Vec<EdgeRef> = self.fan.iter().map(|f| f.lower).collect();
        if self.boundary {
            if let Some(last) = self.fan.last() {
                e.push(last.upper);
            }
        }
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiPatchDomain {
    pub patches: Vec<BilinearPatch>,
    pub interfaces: Vec<Interface>,
    pub boundary_edges: Vec<(usize, usize)>,
    /// Vertices of valency at least three.
    pub vertices: Vec<Vertex>,
    pub diameter: f64,
}

#[derive(Deserialize, Serialize)]
struct DomainFile {
    patches: Vec<[[f64; 2]; 4]>,
}

/// Parses the JSON domain format `{"patches": [[[x, y] × 4], …]}` with
/// corners in the order `c00, c10, c11, c01`.
pub fn parse_domain(text: &str) -> Result<MultiPatchDomain> {
    let file: DomainFile =
        serde_json::from_str(text).map_err(|e| Error::MalformedDomain(e.to_string()))?;
    if file.patches.is_empty() {
        return Err(Error::MalformedDomain("no patches".into()));
    }
    if file.patches.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::MalformedDomain("non-finite coordinate".into()));
    }
    build_topology(file.patches.into_iter().map(BilinearPatch::from_corners).collect())
}

pub fn load_domain(path: impl AsRef<Path>) -> Result<MultiPatchDomain> {
    parse_domain(&std::fs::read_to_string(path)?)
}

/// Serializes patches back into the domain file format.
pub fn domain_to_json(patches: &[BilinearPatch]) -> Result<String> {
    let file = DomainFile {
        patches: patches.iter().map(|p| p.corners()).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

fn validate_patch(i: usize, p: &BilinearPatch) -> Result<()> {
    let turns = p.corner_turns();
    let scale = p.diameter().powi(2);
    if turns.iter().all(|&t| t > 1e-12 * scale) {
        Ok(())
    } else if turns.iter().all(|&t| t < -1e-12 * scale) {
        Err(Error::ClockwisePatch { patch: i })
    } else {
        Err(Error::NonConvexPatch { patch: i })
    }
}

struct PointSet {
    points: Vec<Point>,
    tol: f64,
}

impl PointSet {
    fn id(&mut self, p: Point) -> usize {
        for (i, q) in self.points.iter().enumerate() {
            if (p[0] - q[0]).hypot(p[1] - q[1]) <= self.tol {
                return i;
            }
        }
        self.points.push(p);
        self.points.len() - 1
    }
}

/// Extracts interfaces, boundary edges and vertex fans.
pub fn build_topology(patches: Vec<BilinearPatch>) -> Result<MultiPatchDomain> {
    for (i, p) in patches.iter().enumerate() {
        validate_patch(i, p)?;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in patches.iter().flat_map(|p| p.corners()) {
        for a in 0..2 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let diameter = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    let tol = CORNER_TOL * diameter;
    let mut set = PointSet {
        points: Vec::new(),
        tol,
    };
    let ids: Vec<[usize; 4]> = patches
        .iter()
        .map(|p| p.corners().map(|c| set.id(c)))
        .collect();
    for (i, c) in ids.iter().enumerate() {
        for a in 0..4 {
            for b in a + 1..4 {
                if c[a] == c[b] {
                    return Err(Error::DegenerateGeometry(format!(
                        "patch {i} has coinciding corners"
                    )));
                }
            }
        }
    }
    check_hanging_corners(&ids, &set.points, tol)?;

    // Group patch edges by their unordered corner pair.
    let mut by_pair: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (pi, c) in ids.iter().enumerate() {
        for e in 0..4 {
            let (a, b) = edge_corners(e);
            let key = (c[a].min(c[b]), c[a].max(c[b]));
            by_pair.entry(key).or_default().push((pi, e));
        }
    }
    let mut interfaces = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut edge_ref: BTreeMap<(usize, usize), EdgeRef> = BTreeMap::new();
    let mut pairs: Vec<_> = by_pair.into_values().collect();
    pairs.sort();
    for list in pairs {
        match list.as_slice() {
            [(p, e)] => {
                boundary_edges.push((*p, *e));
            }
            [(pa, ea), (pb, eb)] => {
                let (a0, a1) = edge_corners(*ea);
                let (b0, b1) = edge_corners(*eb);
                if ids[*pa][a0] != ids[*pb][b1] || ids[*pa][a1] != ids[*pb][b0] {
                    return Err(Error::InconsistentEdge(format!(
                        "patches {pa} and {pb} traverse their common edge in the same direction"
                    )));
                }
                let s = interfaces.len();
                interfaces.push(standardize_interface(&patches, &ids, (*pa, *ea), (*pb, *eb))?);
                edge_ref.insert((*pa, *ea), EdgeRef::Interface(s));
                edge_ref.insert((*pb, *eb), EdgeRef::Interface(s));
            }
            more => {
                return Err(Error::Topology(format!(
                    "edge shared by {} patches",
                    more.len()
                )));
            }
        }
    }
    boundary_edges.sort();
    for &(p, e) in &boundary_edges {
        edge_ref.insert((p, e), EdgeRef::Boundary { patch: p, edge: e });
    }
    check_connected(patches.len(), &interfaces)?;

    let mut vertices = Vec::new();
    for (vid, pos) in set.points.iter().enumerate() {
        let vertex = build_fan(vid, *pos, &ids, &edge_ref, &interfaces)?;
        if vertex.valency >= 3 {
            vertices.push(vertex);
        }
    }
    Ok(MultiPatchDomain {
        patches,
        interfaces,
        boundary_edges,
        vertices,
        diameter,
    })
}

fn check_hanging_corners(
    ids: &[[usize; 4]],
    points: &[Point],
    tol: f64,
) -> Result<()> {
    let on_line = |p: Point, a: Point, b: Point| -> Option<f64> {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
        let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
        ((p[0] - qx).hypot(p[1] - qy) <= tol).then_some(t)
    };
    for (pi, c) in ids.iter().enumerate() {
        for e in 0..4 {
            let (a, b) = edge_corners(e);
            let (pa, pb) = (points[c[a]], points[c[b]]);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            let eps = tol / len;
            for (qi, qc) in ids.iter().enumerate() {
                for (corner, &vid) in qc.iter().enumerate() {
                    if vid == c[a] || vid == c[b] {
                        continue;
                    }
                    let Some(t) = on_line(points[vid], pa, pb) else {
                        continue;
                    };
                    if t <= eps || t >= 1.0 - eps {
                        continue;
                    }
                    // A collinear edge reaching past the end of this one is a
                    // partial overlap rather than a hanging corner.
                    let overlap = [(corner + 1) % 4, (corner + 3) % 4].iter().any(|&n| {
                        on_line(points[qc[n]], pa, pb)
                            .is_some_and(|s| s < -eps || s > 1.0 + eps)
                    });
                    if overlap {
                        return Err(Error::InconsistentEdge(format!(
                            "edge {e} of patch {pi} partially overlaps an edge of patch {qi}"
                        )));
                    }
                    return Err(Error::TJunction {
                        patch: qi,
                        corner,
                        other: pi,
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_connected(n: usize, interfaces: &[Interface]) -> Result<()> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for i in interfaces {
        let a = find(&mut parent, i.sides[0].patch);
        let b = find(&mut parent, i.sides[1].patch);
        parent[a] = b;
    }
    let root = find(&mut parent, 0);
    if (0..n).any(|i| find(&mut parent, i) != root) {
        return Err(Error::Topology("patches do not form a connected domain".into()));
    }
    Ok(())
}

fn standardize_interface(
    patches: &[BilinearPatch],
    ids: &[[usize; 4]],
    (pa, ea): (usize, usize),
    (pb, eb): (usize, usize),
) -> Result<Interface> {
    let (c0, c1) = edge_corners(ea);
    // Orientation-preserving side: the edge becomes u = 0.
    let sa = SquareSymmetry::all()
        .into_iter()
        .find(|s| {
            s.preserves_orientation()
                && edge_between(s.native_corner(0, 0), s.native_corner(0, 1)) == Some(ea)
        })
        .ok_or_else(|| Error::Topology("no standard position for interface".into()))?;
    let v0 = ids[pa][sa.native_corner(0, 0)];
    let v1 = ids[pa][sa.native_corner(0, 1)];
    debug_assert!(v0 == ids[pa][c0] || v0 == ids[pa][c1]);
    let sb = SquareSymmetry::all()
        .into_iter()
        .find(|s| {
            ids[pb][s.native_corner(0, 0)] == v0
                && ids[pb][s.native_corner(0, 1)] == v1
                && edge_between(s.native_corner(0, 0), s.native_corner(0, 1)) == Some(eb)
        })
        .ok_or_else(|| Error::Topology("no standard position for interface".into()))?;
    let a = patches[pa].reparameterize(&sa);
    let ends = [a.c00, a.c01];
    Ok(Interface {
        sides: [
            InterfaceSide {
                patch: pb,
                edge: eb,
                symmetry: sb,
            },
            InterfaceSide {
                patch: pa,
                edge: ea,
                symmetry: sa,
            },
        ],
        ends,
    })
}

fn fan_symmetry(corner: usize) -> SquareSymmetry {
    SquareSymmetry::all()
        .into_iter()
        .find(|s| s.preserves_orientation() && s.native_corner(0, 0) == corner)
        .expect("every corner has a rotation")
}

fn build_fan(
    vid: usize,
    position: Point,
    ids: &[[usize; 4]],
    edge_ref: &BTreeMap<(usize, usize), EdgeRef>,
    interfaces: &[Interface],
) -> Result<Vertex> {
    let mut entries = Vec::new();
    for (p, c) in ids.iter().enumerate() {
        for (corner, &id) in c.iter().enumerate() {
            if id == vid {
                let symmetry = fan_symmetry(corner);
                let lower = edge_between(corner, symmetry.native_corner(1, 0)).unwrap();
                let upper = edge_between(corner, symmetry.native_corner(0, 1)).unwrap();
                entries.push(FanEntry {
                    patch: p,
                    corner,
                    symmetry,
                    lower: edge_ref[&(p, lower)],
                    upper: edge_ref[&(p, upper)],
                });
            }
        }
    }
    let starts: Vec<usize> = (0..entries.len())
        .filter(|&i| matches!(entries[i].lower, EdgeRef::Boundary { .. }))
        .collect();
    let boundary = !starts.is_empty();
    if starts.len() > 1 {
        return Err(Error::Topology(format!(
            "removing vertex ({}, {}) disconnects the domain",
            position[0], position[1]
        )));
    }
    let start = starts.first().copied().unwrap_or(0);
    let mut fan = vec![entries[start]];
    loop {
        let cur = *fan.last().unwrap();
        let EdgeRef::Interface(s) = cur.upper else {
            break;
        };
        let iface = &interfaces[s];
        let other = iface.sides[1 - iface.side_of(cur.patch).unwrap()].patch;
        let next = entries
            .iter()
            .find(|e| e.patch == other && e.lower == EdgeRef::Interface(s))
            .ok_or_else(|| Error::Topology("inconsistent vertex fan".into()))?;
        if next.patch == fan[0].patch && next.corner == fan[0].corner {
            break;
        }
        fan.push(*next);
        if fan.len() > entries.len() {
            return Err(Error::Topology("inconsistent vertex fan".into()));
        }
    }
    if fan.len() != entries.len() {
        return Err(Error::Topology(format!(
            "removing vertex ({}, {}) disconnects the domain",
            position[0], position[1]
        )));
    }
    let valency = if boundary { fan.len() + 1 } else { fan.len() };
    Ok(Vertex {
        position,
        fan,
        valency,
        boundary,
    })
}

impl MultiPatchDomain {
    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    pub fn interface_count(&self) -> usize {
        self.interfaces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Patch `ℓ` seen through `sym`.
    pub fn standardized_patch(&self, patch: usize, sym: &SquareSymmetry) -> BilinearPatch {
        self.patches[patch].reparameterize(sym)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_squares() -> Vec<BilinearPatch> {
        vec![
            BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
            BilinearPatch::from_corners([[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]),
        ]
    }

    #[test]
    fn two_squares_topology() {
        let d = build_topology(two_squares()).unwrap();
        assert_eq!(d.patch_count(), 2);
        assert_eq!(d.interface_count(), 1);
        assert_eq!(d.boundary_edges.len(), 6);
        // The two ends of the interface meet three edges each.
        assert_eq!(d.vertex_count(), 2);
        for v in &d.vertices {
            assert!(v.boundary);
            assert_eq!(v.valency, 3);
            assert_eq!(v.fan.len(), 2);
        }
    }

    #[test]
    fn interface_contract() {
        let d = build_topology(two_squares()).unwrap();
        let i = &d.interfaces[0];
        let a = d.standardized_patch(i.sides[0].patch, &i.sides[0].symmetry);
        let b = d.standardized_patch(i.sides[1].patch, &i.sides[1].symmetry);
        for t in [0.0, 0.3, 1.0] {
            assert!((a.eval(0.0, t) - b.eval(0.0, t)).norm() < 1e-14);
        }
        assert!(a.det(0.0, 0.5) < 0.0);
        assert!(b.det(0.0, 0.5) > 0.0);
    }

    #[test]
    fn reflex_and_clockwise_patches() {
        let reflex = BilinearPatch::from_corners([[0.0, 0.0], [2.0, 0.0], [0.5, 0.5], [0.0, 2.0]]);
        assert!(matches!(
            build_topology(vec![reflex]),
            Err(Error::NonConvexPatch { patch: 0 })
        ));
        let cw = BilinearPatch::from_corners([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(
            build_topology(vec![cw]),
            Err(Error::ClockwisePatch { patch: 0 })
        ));
    }

    #[test]
    fn hanging_corner_is_rejected() {
        let p = vec![
            BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [0.0, 2.0]]),
            BilinearPatch::from_corners([[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]),
        ];
        assert!(matches!(build_topology(p), Err(Error::TJunction { .. })));
    }

    #[test]
    fn partial_overlap_is_rejected() {
        let p = vec![
            BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [0.0, 2.0]]),
            BilinearPatch::from_corners([[1.0, 1.0], [2.0, 1.0], [2.0, 3.0], [1.0, 3.0]]),
        ];
        assert!(matches!(build_topology(p), Err(Error::InconsistentEdge(_))));
    }

    #[test]
    fn malformed_file() {
        assert!(matches!(parse_domain("{"), Err(Error::MalformedDomain(_))));
        assert!(matches!(
            parse_domain(r#"{"patches": []}"#),
            Err(Error::MalformedDomain(_))
        ));
    }

    #[test]
    fn disconnected_domain() {
        let p = vec![
            BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
            BilinearPatch::from_corners([[3.0, 0.0], [4.0, 0.0], [4.0, 1.0], [3.0, 1.0]]),
        ];
        assert!(matches!(build_topology(p), Err(Error::Topology(_))));
    }
}
