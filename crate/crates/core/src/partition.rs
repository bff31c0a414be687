//! Square-block domain decomposition and interface bookkeeping.

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::mesh::PolygonalMesh;
use crate::vem::{DofMap, GlobalSystem};
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

/// Interface between subdomains `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainEdge {
    pub i: usize,
    pub j: usize,
    /// interface nodes shared by exactly {i, j}, ordered along the polyline
    pub nodes: Vec<usize>,
    /// mesh edges separating a cell of i from a cell of j
    pub mesh_edges: Vec<usize>,
    /// per node: Σ_e w_e n_e over adjacent separating mesh edges, with n_e
    /// pointing out of subdomain i (the discrete normal flux weight)
    pub flux_weights: Vec<[f64; 2]>,
    /// per node: Σ_e w_e t_e with t_e the normal rotated counterclockwise
    pub tangent_weights: Vec<[f64; 2]>,
    /// per node: Σ_e w_e (plain line-integral weight)
    pub line_weights: Vec<f64>,
    /// unit normal of the whole edge, from i to j
    pub normal: [f64; 2],
}

impl SubdomainEdge {
    /// Normal seen from subdomain `s` (outward of `s`).
    pub fn normal_from(&self, s: usize) -> [f64; 2] {
        if s == self.i {
            self.normal
        } else {
            [-self.normal[0], -self.normal[1]]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Boundary,
    Interior(usize),
    /// shared by exactly two subdomains
    Edge,
    /// shared by more than two subdomains
    Vertex,
}

#[derive(Debug, Clone)]
pub struct SubdomainPartition {
    pub subdomains_per_side: usize,
    pub num_subdomains: usize,
    pub cell_subdomain: Vec<usize>,
    pub subdomain_cells: Vec<Vec<usize>>,
    pub dofmap: DofMap,
    /// sorted subdomain ids touching each node
    pub node_subdomains: Vec<Vec<usize>>,
    pub node_class: Vec<NodeClass>,
    /// interface velocity dofs (free-dof ids, ascending)
    pub interface_dofs: Vec<usize>,
    /// free dof -> position in `interface_dofs`
    pub interface_index: Vec<Option<usize>>,
    /// card(I_x) per interface dof
    pub multiplicity: Vec<usize>,
    /// interface node ids with more than two subdomains
    pub vertex_nodes: Vec<usize>,
    pub edges: Vec<SubdomainEdge>,
    /// free interior velocity dofs per subdomain (ascending)
    pub interior_dofs: Vec<Vec<usize>>,
    /// R_Γ^(i): interface positions touched by each subdomain (ascending)
    pub subdomain_interface: Vec<Vec<usize>>,
}

/// Assigns each cell to the square block containing its centroid.
pub fn partition_regular(mesh: &PolygonalMesh, subdomains_per_side: usize) -> Result<SubdomainPartition> {
    let m = subdomains_per_side;
    if m < 2 {
        return Err(Error::Partition(format!(
            "need at least 2 subdomains per side, got {m} (no interface otherwise)"
        )));
    }
    let n_sub = m * m;
    if n_sub > mesh.num_cells() {
        return Err(Error::Partition(format!(
            "{n_sub} subdomains for only {} cells",
            mesh.num_cells()
        )));
    }
    // ties on block boundaries go to the lower block
    let block = |t: f64| (((t * m as f64).ceil() as usize).max(1) - 1).min(m - 1);
    let cell_subdomain: Vec<usize> = (0..mesh.num_cells())
        .map(|c| {
            let g = mesh.cell_geometry(c).centroid;
            block(g.y) * m + block(g.x)
        })
        .collect();
    let mut subdomain_cells = vec![Vec::new(); n_sub];
    for (c, &s) in cell_subdomain.iter().enumerate() {
        subdomain_cells[s].push(c);
    }
    check_connected(mesh, &cell_subdomain, &subdomain_cells)?;

    let dofmap = DofMap::new(mesh);
    let mut node_subdomains: Vec<Vec<usize>> = mesh
        .vertex_cells()
        .into_iter()
        .map(|cells| cells.into_iter().map(|c| cell_subdomain[c]).collect())
        .collect();
    node_subdomains.extend(
        mesh.edges()
            .iter()
            .map(|e| e.adjacent_cells().map(|c| cell_subdomain[c]).collect::<Vec<_>>()),
    );
    for s in node_subdomains.iter_mut() {
        s.sort_unstable();
        s.dedup();
    }
    let node_class: Vec<NodeClass> = node_subdomains
        .iter()
        .enumerate()
        .map(|(n, s)| {
            if dofmap.node_on_boundary(n) {
                NodeClass::Boundary
            } else {
                match s.len() {
                    1 => NodeClass::Interior(s[0]),
                    2 => NodeClass::Edge,
                    _ => NodeClass::Vertex,
                }
            }
        })
        .collect();

    let n_free = dofmap.num_free_velocity_dofs();
    let mut interface_dofs = Vec::new();
    let mut interface_index = vec![None; n_free];
    let mut multiplicity = Vec::new();
    let mut interior_dofs = vec![Vec::new(); n_sub];
    for (k, &d) in dofmap.free_to_full().iter().enumerate() {
        let (node, _) = dofmap.dof_carrier(d);
        match node_class[node] {
            NodeClass::Interior(s) => interior_dofs[s].push(k),
            NodeClass::Edge | NodeClass::Vertex => {
                interface_index[k] = Some(interface_dofs.len());
                interface_dofs.push(k);
                multiplicity.push(node_subdomains[node].len());
            }
            NodeClass::Boundary => unreachable!("boundary dofs are eliminated"),
        }
    }
    let mut subdomain_interface = vec![Vec::new(); n_sub];
    for (g, &k) in interface_dofs.iter().enumerate() {
        let (node, _) = dofmap.dof_carrier(dofmap.free_to_full()[k]);
        for &s in &node_subdomains[node] {
            subdomain_interface[s].push(g);
        }
    }
    let vertex_nodes: Vec<usize> = (0..node_class.len())
        .filter(|&n| node_class[n] == NodeClass::Vertex)
        .collect();

    // separating mesh edges grouped by subdomain pair
    let mut pair_edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if let [Some(a), Some(b)] = edge.cells {
            let (sa, sb) = (cell_subdomain[a], cell_subdomain[b]);
            if sa != sb {
                pair_edges.entry((sa.min(sb), sa.max(sb))).or_default().push(e);
            }
        }
    }
    let mut edges = Vec::new();
    for ((i, j), mesh_edges) in pair_edges {
        let edge = build_subdomain_edge(mesh, &dofmap, &cell_subdomain, &node_class, &node_subdomains, i, j, mesh_edges);
        if !edge.nodes.is_empty() {
            edges.push(edge);
        }
    }

    Ok(SubdomainPartition {
        subdomains_per_side: m,
        num_subdomains: n_sub,
        cell_subdomain,
        subdomain_cells,
        dofmap,
        node_subdomains,
        node_class,
        interface_dofs,
        interface_index,
        multiplicity,
        vertex_nodes,
        edges,
        interior_dofs,
        subdomain_interface,
    })
}

fn check_connected(mesh: &PolygonalMesh, cell_subdomain: &[usize], subdomain_cells: &[Vec<usize>]) -> Result<()> {
    let mut neighbors = vec![Vec::new(); mesh.num_cells()];
    for e in mesh.edges() {
        if let [Some(a), Some(b)] = e.cells {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    }
    let mut seen = vec![false; mesh.num_cells()];
    for (s, cells) in subdomain_cells.iter().enumerate() {
        let Some(&start) = cells.first() else {
            return Err(Error::Partition(format!("subdomain {s} is empty")));
        };
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for &nb in &neighbors[c] {
                if !seen[nb] && cell_subdomain[nb] == s {
                    seen[nb] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        if count != cells.len() {
            return Err(Error::Partition(format!(
                "subdomain {s} is not edge-connected ({count} of {} cells reachable)",
                cells.len()
            )));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_subdomain_edge(
    mesh: &PolygonalMesh,
    dofmap: &DofMap,
    cell_subdomain: &[usize],
    node_class: &[NodeClass],
    node_subdomains: &[Vec<usize>],
    i: usize,
    j: usize,
    mesh_edges: Vec<usize>,
) -> SubdomainEdge {
    let in_edge = |n: usize| node_class[n] == NodeClass::Edge && node_subdomains[n] == [i, j];
    let mut weights: BTreeMap<usize, ([f64; 2], [f64; 2], f64)> = BTreeMap::new();
    let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in &mesh_edges {
        let edge = &mesh.edges()[e];
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let len = pa.dist(pb);
        // canonical direction a->b has cells[0] on its left; its outward normal
        // (dy, -dx) points away from cells[0]
        let mut n = [(pb.y - pa.y) / len, -(pb.x - pa.x) / len];
        if cell_subdomain[edge.cells[0].unwrap()] != i {
            n = [-n[0], -n[1]];
        }
        let t = [-n[1], n[0]];
        let mid = dofmap.edge_node(e);
        for (node, w) in [(a, len / 6.0), (mid, 4.0 * len / 6.0), (b, len / 6.0)] {
            if in_edge(node) {
                let entry = weights.entry(node).or_insert(([0.0; 2], [0.0; 2], 0.0));
                entry.2 += w;
                for c in 0..2 {
                    entry.0[c] += w * n[c];
                    entry.1[c] += w * t[c];
                }
            }
        }
        let chain = [a, mid, b];
        for w in chain.windows(2) {
            if in_edge(w[0]) && in_edge(w[1]) {
                adjacency.entry(w[0]).or_default().push(w[1]);
                adjacency.entry(w[1]).or_default().push(w[0]);
            }
        }
    }
    // walk the polyline starting from endpoints, then any leftover cycles
    let mut order = Vec::with_capacity(weights.len());
    let mut visited: BTreeMap<usize, bool> = weights.keys().map(|&k| (k, false)).collect();
    let degree = |n: usize| adjacency.get(&n).map_or(0, Vec::len);
    let mut starts: Vec<usize> = weights.keys().copied().collect();
    starts.sort_by_key(|&n| (degree(n) > 1, n));
    for s in starts {
        if visited[&s] {
            continue;
        }
        let mut cur = Some(s);
        while let Some(c) = cur {
            visited.insert(c, true);
            order.push(c);
            cur = adjacency
                .get(&c)
                .and_then(|nb| nb.iter().copied().filter(|x| !visited[x]).min());
        }
    }
    let flux_weights: Vec<[f64; 2]> = order.iter().map(|n| weights[n].0).collect();
    let tangent_weights: Vec<[f64; 2]> = order.iter().map(|n| weights[n].1).collect();
    let line_weights: Vec<f64> = order.iter().map(|n| weights[n].2).collect();
    let sum = flux_weights.iter().fold([0.0, 0.0], |s, w| [s[0] + w[0], s[1] + w[1]]);
    let len = sum[0].hypot(sum[1]);
    let normal = if len > 0.0 { [sum[0] / len, sum[1] / len] } else { [0.0, 0.0] };
    SubdomainEdge {
        i,
        j,
        nodes: order,
        mesh_edges,
        flux_weights,
        tangent_weights,
        line_weights,
        normal,
    }
}

impl SubdomainPartition {
    pub fn num_interface_dofs(&self) -> usize {
        self.interface_dofs.len()
    }

    /// Interface position of `(node, comp)`, if that dof is on Γ.
    pub fn interface_position(&self, node: usize, comp: usize) -> Option<usize> {
        let d = self.dofmap.velocity_dof(node, comp);
        self.dofmap.free_index(d).and_then(|k| self.interface_index[k])
    }

    /// Subdomain areas |Ω_i|.
    pub fn subdomain_areas(&self, cell_areas: &[f64]) -> Vec<f64> {
        self.subdomain_cells
            .iter()
            .map(|cells| cells.iter().map(|&c| cell_areas[c]).sum())
            .collect()
    }

    /// `cell subdomain` lines.
    pub fn dump_cells(&self) -> String {
        let mut s = String::new();
        for (c, d) in self.cell_subdomain.iter().enumerate() {
            writeln!(s, "{c} {d}").unwrap();
        }
        s
    }

    /// `dof class multiplicity` lines over interface dofs (free-dof numbering).
    pub fn dump_interface(&self) -> String {
        let mut s = String::new();
        for (g, &k) in self.interface_dofs.iter().enumerate() {
            let (node, _) = self.dofmap.dof_carrier(self.dofmap.free_to_full()[k]);
            let class = match self.node_class[node] {
                NodeClass::Vertex => "vertex",
                _ => "edge",
            };
            writeln!(s, "{k} {class} {}", self.multiplicity[g]).unwrap();
        }
        s
    }
}

/// Unassembled blocks of one subdomain.
#[derive(Debug, Clone)]
pub struct SubdomainBlocks {
    pub id: usize,
    pub cells: Vec<usize>,
    /// free interior dofs
    pub interior: Vec<usize>,
    /// R_Γ^(i): global interface positions
    pub interface: Vec<usize>,
    pub a_ii: CsrMatrix,
    /// interior × local interface
    pub a_ig: CsrMatrix,
    pub a_gg: CsrMatrix,
    /// cells × interior
    pub b_ii: CsrMatrix,
    /// cells × local interface
    pub b_ig: CsrMatrix,
    /// 1ᵀ B_IΓ: flux of interface velocities through ∂Ω_i
    pub b_0g: Vec<f64>,
    pub f_i: Vec<f64>,
    pub f_g: Vec<f64>,
    pub cell_areas: Vec<f64>,
}

/// Subassembles every subdomain from the element matrices of its cells.
pub fn subdomain_local_systems(part: &SubdomainPartition, sys: &GlobalSystem) -> Result<Vec<SubdomainBlocks>> {
    if sys.dofmap != part.dofmap {
        return Err(Error::Dimension("partition and system use different dof maps".into()));
    }
    (0..part.num_subdomains).map(|s| subdomain_blocks(part, sys, s)).collect()
}

fn subdomain_blocks(part: &SubdomainPartition, sys: &GlobalSystem, s: usize) -> Result<SubdomainBlocks> {
    let interior = part.interior_dofs[s].clone();
    let interface = part.subdomain_interface[s].clone();
    let (ni, ng) = (interior.len(), interface.len());
    // free dof -> local index (interior first, then interface)
    let mut local: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, &d) in interior.iter().enumerate() {
        local.insert(d, k);
    }
    for (k, &g) in interface.iter().enumerate() {
        local.insert(part.interface_dofs[g], ni + k);
    }
    let cells = part.subdomain_cells[s].clone();
    let n = ni + ng;
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut f = vec![0.0; n];
    for (lc, &c) in cells.iter().enumerate() {
        let el = &sys.elements[c];
        let dofs: Vec<Option<usize>> = sys
            .cell_free_dofs(c)
            .into_iter()
            .map(|d| d.map(|d| local.get(&d).copied().ok_or(d)).transpose())
            .collect::<std::result::Result<_, usize>>()
            .map_err(|d| Error::Dimension(format!("subdomain {s}: dof {d} of cell {c} is not local")))?;
        for (a, da) in dofs.iter().enumerate() {
            let Some(la) = *da else { continue };
            f[la] += el.f[a];
            tb.push((lc, la, el.b[a]));
            for (b, db) in dofs.iter().enumerate() {
                if let Some(lb) = *db {
                    ta.push((la, lb, el.a[(a, b)]));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &ta);
    let b = CsrMatrix::from_triplets(cells.len(), n, &tb);
    let imap: Vec<Option<usize>> = (0..n).map(|k| (k < ni).then_some(k)).collect();
    let gmap: Vec<Option<usize>> = (0..n).map(|k| (k >= ni).then(|| k - ni)).collect();
    let rows: Vec<Option<usize>> = (0..cells.len()).map(Some).collect();
    let b_ig = b.select(&rows, cells.len(), &gmap, ng);
    let mut b_0g = vec![0.0; ng];
    b_ig.tr_mul_vec_add(1.0, &vec![1.0; cells.len()], &mut b_0g);
    Ok(SubdomainBlocks {
        id: s,
        a_ii: a.select(&imap, ni, &imap, ni),
        a_ig: a.select(&imap, ni, &gmap, ng),
        a_gg: a.select(&gmap, ng, &gmap, ng),
        b_ii: b.select(&rows, cells.len(), &imap, ni),
        b_ig,
        b_0g,
        f_i: f[..ni].to_vec(),
        f_g: f[ni..].to_vec(),
        cell_areas: cells.iter().map(|&c| sys.cell_areas[c]).collect(),
        cells,
        interior,
        interface,
    })
}
