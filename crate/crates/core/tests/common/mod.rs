//! Shared helpers for the integration suites.

use std::collections::BTreeMap;

use ergodicity_lab::generator::{build_generator, DiscreteGenerator};
use ergodicity_lab::grid::TorusGrid;
use ergodicity_lab::problem::{build_gallery, EllipticProblem, GalleryId};

pub const ALL_GALLERIES: [GalleryId; 6] = [
    GalleryId::ConstantCost,
    GalleryId::EikonalF,
    GalleryId::LinearFirstOrder,
    GalleryId::ViscousSuperlinear,
    GalleryId::UniformlyElliptic,
    GalleryId::Superquadratic,
];

pub fn gallery(id: GalleryId, dim: usize, n: usize) -> (EllipticProblem, DiscreteGenerator) {
    gallery_with(id, dim, n, &BTreeMap::new())
}

pub fn gallery_with(
    id: GalleryId,
    dim: usize,
    n: usize,
    params: &BTreeMap<String, f64>,
) -> (EllipticProblem, DiscreteGenerator) {
    let grid = TorusGrid::new(dim, n).expect("grid");
    let p = build_gallery(id, params, grid).expect("gallery");
    let g = build_generator(&p);
    (p, g)
}

#[allow(dead_code)]
pub fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
