use crate::mesh::{Point2, PolygonalMesh};

/// Velocity dofs live on nodes: mesh vertices first, then one Gauss-Lobatto
/// point (the midpoint) per edge. Unreduced dof of `(node, comp)` is
/// `comp * num_nodes + node`; free dofs keep that order with Dirichlet dofs removed.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    num_vertices: usize,
    num_edges: usize,
    num_cells: usize,
    node_on_boundary: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free_to_full: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh) -> Self {
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut node_on_boundary: Vec<bool> = mesh.boundary_vertex_flags().to_vec();
        node_on_boundary.extend(mesh.edges().iter().map(|e| e.is_boundary()));
        let nn = nv + ne;
        let mut free_index = vec![None; 2 * nn];
        let mut free_to_full = Vec::new();
        for (d, slot) in free_index.iter_mut().enumerate() {
            if !node_on_boundary[d % nn] {
                *slot = Some(free_to_full.len());
                free_to_full.push(d);
            }
        }
        DofMap {
            num_vertices: nv,
            num_edges: ne,
            num_cells: mesh.num_cells(),
            node_on_boundary,
            free_index,
            free_to_full,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_vertices + self.num_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Velocity dofs before Dirichlet elimination.
    pub fn num_velocity_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_free_velocity_dofs(&self) -> usize {
        self.free_to_full.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.num_cells
    }

    pub fn vertex_node(&self, v: usize) -> usize {
        v
    }

    pub fn edge_node(&self, e: usize) -> usize {
        self.num_vertices + e
    }

    pub fn velocity_dof(&self, node: usize, comp: usize) -> usize {
        comp * self.num_nodes() + node
    }

    /// Inverse of `velocity_dof`: `(node, comp)`.
    pub fn dof_carrier(&self, dof: usize) -> (usize, usize) {
        (dof % self.num_nodes(), dof / self.num_nodes())
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.free_index[dof].is_none()
    }

    pub fn node_on_boundary(&self, node: usize) -> bool {
        self.node_on_boundary[node]
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    pub fn free_to_full(&self) -> &[usize] {
        &self.free_to_full
    }

    pub fn node_point(&self, mesh: &PolygonalMesh, node: usize) -> Point2 {
        if node < self.num_vertices {
            mesh.vertices()[node]
        } else {
            mesh.edge_midpoint(node - self.num_vertices)
        }
    }

    /// Unreduced dofs of a cell in local order `comp * 2k + local_node`, where
    /// local nodes are the k vertices followed by the k edge midpoints.
    pub fn cell_dofs(&self, mesh: &PolygonalMesh, c: usize) -> Vec<usize> {
        let cell = mesh.cell(c);
        let edges = mesh.cell_edges(c);
        let nodes: Vec<usize> = cell
            .iter()
            .map(|&v| self.vertex_node(v))
            .chain(edges.iter().map(|&e| self.edge_node(e)))
            .collect();
        (0..2)
            .flat_map(|comp| nodes.iter().map(move |&n| self.velocity_dof(n, comp)))
            .collect()
    }

    /// Expands a free-dof vector to all velocity dofs (zeros on the boundary).
    pub fn expand(&self, u_free: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.num_velocity_dofs()];
        for (k, &d) in self.free_to_full.iter().enumerate() {
            u[d] = u_free[k];
        }
        u
    }
}
