use iga_c2::basis::{assemble_space, boundary_residual, interface_jump, EdgeBuilder};
use iga_c2::bspline::make_space;
use iga_c2::gluing::{g2_residuals, gluing_data};
use iga_c2::multipatch::{load_domain, MultiPatchDomain};

fn data(name: &str) -> MultiPatchDomain {
    load_domain(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn domain_a_dimensions() {
    let domain = data("domain_a.json");
    assert_eq!(domain.patch_count(), 3);
    assert_eq!(domain.interface_count(), 3);
    assert_eq!(domain.vertex_count(), 4);
    let b = assemble_space(&domain, 5, 2, 5).unwrap();
    assert_eq!(b.patch_dims, vec![225; 3]);
    assert_eq!(b.edge_dims, vec![6; 3]);
    let mut vd = b.vertex_dims.clone();
    vd.sort();
    assert_eq!(vd, vec![3, 3, 3, 16]);
    assert_eq!(b.dim(), 718);
}

#[test]
fn domain_a_functions_are_c2_and_clamped() {
    let domain = data("domain_a.json");
    let b = assemble_space(&domain, 5, 2, 5).unwrap();
    let samples: Vec<f64> = (0..=16).map(|t| t as f64 / 16.0).collect();
    let mut worst = (0.0f64, 0.0f64);
    for f in &b.functions[b.edge_range.start..] {
        let j = interface_jump(&domain, &b, f, 21).unwrap();
        let z = boundary_residual(&domain, &b, f, 21).unwrap();
        worst = (worst.0.max(j), worst.1.max(z));
        assert!(j < 1e-9, "{:?}: relative jump {j:e}", f.kind);
        assert!(z < 1e-10, "{:?}: boundary residual {z:e}", f.kind);
        for s in 0..domain.interface_count() {
            let scale = f.max_coefficient();
            for r in g2_residuals(f, &domain, &b.gluing[s], s, &b.space, &samples) {
                for x in r {
                    assert!(x.abs() < 1e-9 * scale.max(1.0), "{:?} on {s}: {r:?}", f.kind);
                }
            }
        }
    }
    eprintln!("worst jump {:e}, boundary {:e}", worst.0, worst.1);
}

#[test]
fn domain_a_gram_full_rank() {
    let domain = data("domain_a.json");
    let b = assemble_space(&domain, 5, 2, 5).unwrap();
    assert_eq!(b.gram_rank(domain.patch_count()), b.dim());
}

#[test]
fn quarter_mesh_space() {
    let domain = data("domain_a.json");
    let b = assemble_space(&domain, 5, 2, 3).unwrap();
    assert_eq!(b.patch_dims, vec![81; 3]);
    assert_eq!(b.edge_dims, vec![2; 3]);
    assert_eq!(b.gram_rank(domain.patch_count()), b.dim());
    for f in &b.functions[b.edge_range.start..] {
        assert!(interface_jump(&domain, &b, f, 21).unwrap() < 1e-9, "{:?}", f.kind);
        assert!(boundary_residual(&domain, &b, f, 21).unwrap() < 1e-10, "{:?}", f.kind);
    }
}

#[test]
fn edge_support_windows_on_domain_a() {
    let domain = data("domain_a.json");
    let space = make_space(5, 2, 5).unwrap();
    for s in 0..domain.interface_count() {
        let glue = gluing_data(&domain, s).unwrap();
        let v = EdgeBuilder::new(&space, &glue).unwrap().window_violation().unwrap();
        assert!(v < 1e-11, "interface {s}: {v:e}");
    }
}
