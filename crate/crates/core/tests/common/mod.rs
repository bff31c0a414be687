#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vem_bddc::mesh::{generate_mesh, MeshFamily, PolygonalMesh};
use vem_bddc::partition::{partition_regular, SubdomainPartition};
use vem_bddc::vem::{assemble, manufactured, GlobalSystem};

pub struct Problem {
    pub mesh: PolygonalMesh,
    pub sys: GlobalSystem,
    pub part: SubdomainPartition,
}

pub fn problem(family: MeshFamily, n: usize, m: usize) -> Problem {
    let mesh = generate_mesh(family, n, 1, 100).unwrap();
    let nu = vec![1.0; mesh.num_cells()];
    let sys = assemble(&mesh, &nu, &|p| manufactured::load(p, 1.0)).unwrap();
    let part = partition_regular(&mesh, m).unwrap();
    Problem { mesh, sys, part }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
