//! Overlapping subdomain structure: square-block partitions, layer-growth
//! overlap, partition-of-unity weights, dof multiplicities and the overlap
//! statistic `k0`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::Mesh;

/// How non-overlapping blocks are extended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverlapMode {
    /// Add `layers` layers of node-touching elements.
    Minimal { layers: usize },
    /// Extend by a fixed physical width `delta` (a multiple of `h`),
    /// with a partition of unity varying smoothly over the overlap.
    Generous { delta: f64 },
}

/// Non-overlapping partition of the elements into `k x k` square blocks.
#[derive(Debug, Clone)]
pub struct Partition {
    pub n: usize,
    pub k: usize,
    /// Element index -> owning subdomain.
    pub owner: Vec<usize>,
}

/// One overlapping subdomain with its dof bookkeeping.
#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    /// Elements of the overlapping subdomain, sorted.
    pub elements: Vec<usize>,
    /// Full dof set (tilde V_j): free dofs of all elements, ascending.
    pub all_dofs: Vec<usize>,
    /// Global free dof -> index into `all_dofs`.
    pub global_to_local: HashMap<usize, usize>,
    /// Per local dof: lies in dof(Omega_j) (not on the internal boundary).
    pub internal: Vec<bool>,
    /// POU weight per local dof; zero on non-internal dofs.
    pub weights: Vec<f64>,
}

impl Subdomain {
    /// Global indices of the internal dofs (the space V_j), ascending.
    pub fn internal_dofs_global(&self) -> Vec<usize> {
        self.all_dofs
            .iter()
            .zip(&self.internal)
            .filter(|(_, &int)| int)
            .map(|(&g, _)| g)
            .collect()
    }

    /// Restrict a global vector to the subdomain's full dof set.
    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        self.all_dofs.iter().map(|&g| global[g]).collect()
    }

    /// Add the zero-extension of a local vector into a global one.
    pub fn extend_add(&self, local: &[f64], global: &mut [f64]) {
        for (&g, &v) in self.all_dofs.iter().zip(local) {
            global[g] += v;
        }
    }

    /// Apply the partition-of-unity map `Xi_j` in local coordinates:
    /// weight on internal dofs, zero elsewhere.
    pub fn apply_pou(&self, local: &[f64]) -> Vec<f64> {
        local
            .iter()
            .zip(&self.weights)
            .map(|(&v, &w)| v * w)
            .collect()
    }
}

/// The full overlapping decomposition.
#[derive(Debug, Clone)]
pub struct DomainDecomposition {
    pub n: usize,
    pub mode: OverlapMode,
    pub subdomains: Vec<Subdomain>,
    /// Per global free dof: number of subdomains it is internal to.
    pub mu: Vec<usize>,
    /// Maximum number of subdomains sharing any one element.
    pub k0: usize,
}

impl DomainDecomposition {
    /// Largest subdomain bounding-box diagonal (physical length).
    pub fn max_subdomain_diameter(&self, mesh: &Mesh) -> f64 {
        self.subdomains
            .iter()
            .map(|sd| {
                let mut xmin = f64::INFINITY;
                let mut xmax = f64::NEG_INFINITY;
                let mut ymin = f64::INFINITY;
                let mut ymax = f64::NEG_INFINITY;
                for &e in &sd.elements {
                    for &node in &mesh.element_nodes(e) {
                        let (x, y) = mesh.node_coords(node);
                        xmin = xmin.min(x);
                        xmax = xmax.max(x);
                        ymin = ymin.min(y);
                        ymax = ymax.max(y);
                    }
                }
                ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// CSV dump of per-dof multiplicity and per-subdomain dof counts.
    pub fn write_debug_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "subdomain,n_elements,n_dofs,n_internal")?;
        for sd in &self.subdomains {
            writeln!(
                w,
                "{},{},{},{}",
                sd.id,
                sd.elements.len(),
                sd.all_dofs.len(),
                sd.internal.iter().filter(|&&b| b).count()
            )?;
        }
        writeln!(w, "dof,mu")?;
        for (i, m) in self.mu.iter().enumerate() {
            writeln!(w, "{i},{m}")?;
        }
        Ok(())
    }
}

/// Partition the mesh into `n = k^2` blocks of cells with sides as equal
/// as possible (strip `i` covers cells `[i*nc/k, (i+1)*nc/k)`).
pub fn partition_square(mesh: &Mesh, n: usize) -> Result<Partition> {
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n || n == 0 || mesh.nx < k || mesh.ny < k {
        return Err(Error::Partition {
            nx: mesh.nx,
            ny: mesh.ny,
            n,
        });
    }
    // Strip index of a cell; strips are contiguous with near-equal sizes.
    let strip = |c: usize, nc: usize| -> usize { c * k / nc };
    let mut owner = vec![0usize; mesh.n_elements()];
    for (e, o) in owner.iter_mut().enumerate() {
        let (cx, cy) = mesh.element_cell(e);
        *o = strip(cy, mesh.ny) * k + strip(cx, mesh.nx);
    }
    Ok(Partition { n, k, owner })
}

/// Grow each block into an overlapping subdomain and compute all dof
/// bookkeeping: internal dofs, multiplicities, `k0` and POU weights.
pub fn extend_overlap(
    mesh: &Mesh,
    partition: Partition,
    mode: OverlapMode,
) -> Result<DomainDecomposition> {
    let layers = match mode {
        OverlapMode::Minimal { layers } => {
            if layers == 0 {
                return Err(Error::Parameter("minimal overlap needs layers >= 1".into()));
            }
            layers
        }
        OverlapMode::Generous { delta } => {
            let ratio = delta / mesh.h;
            let rounded = ratio.round();
            if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.abs().max(1.0) {
                return Err(Error::Parameter(format!(
                    "generous overlap delta = {delta} is not a positive multiple of h = {}",
                    mesh.h
                )));
            }
            rounded as usize
        }
    };

    let n_elems = mesh.n_elements();
    let n_nodes = mesh.n_nodes();
    let mut membership: Vec<Vec<bool>> = Vec::with_capacity(partition.n);
    for j in 0..partition.n {
        let mut in_sd = vec![false; n_elems];
        for e in 0..n_elems {
            if partition.owner[e] == j {
                in_sd[e] = true;
            }
        }
        for _ in 0..layers {
            let mut node_touched = vec![false; n_nodes];
            for e in 0..n_elems {
                if in_sd[e] {
                    for &v in &mesh.element_nodes(e) {
                        node_touched[v] = true;
                    }
                }
            }
            for e in 0..n_elems {
                if !in_sd[e] && mesh.element_nodes(e).iter().any(|&v| node_touched[v]) {
                    in_sd[e] = true;
                }
            }
        }
        membership.push(in_sd);
    }

    // k0: element membership counts.
    let mut k0 = 0usize;
    for e in 0..n_elems {
        let count = membership.iter().filter(|m| m[e]).count();
        k0 = k0.max(count);
    }

    // Per-subdomain dof sets and internal flags.
    let n_free = mesh.n_free_dofs();
    let mut subdomains = Vec::with_capacity(partition.n);
    let mut mu = vec![0usize; n_free];
    for (j, in_sd) in membership.iter().enumerate() {
        let elements: Vec<usize> = (0..n_elems).filter(|&e| in_sd[e]).collect();
        if elements.is_empty() {
            return Err(Error::EmptySubdomain(j));
        }
        let mut node_in = vec![false; n_nodes];
        for &e in &elements {
            for &v in &mesh.element_nodes(e) {
                node_in[v] = true;
            }
        }
        let mut all_dofs = Vec::new();
        for node in 0..n_nodes {
            if node_in[node] {
                if let Some(dof) = mesh.free_dofs[node] {
                    all_dofs.push(dof);
                }
            }
        }
        all_dofs.sort_unstable();
        let global_to_local: HashMap<usize, usize> = all_dofs
            .iter()
            .enumerate()
            .map(|(l, &g)| (g, l))
            .collect();
        // Internal dof: every adjacent mesh element lies inside the
        // subdomain (so the dof is not on the internal boundary; the global
        // Dirichlet boundary does not count).
        let internal: Vec<bool> = all_dofs
            .iter()
            .map(|&g| {
                let node = mesh.dof_to_node[g];
                mesh.node_elements(node).iter().all(|&e| in_sd[e])
            })
            .collect();
        for (local, &g) in all_dofs.iter().enumerate() {
            if internal[local] {
                mu[g] += 1;
            }
        }
        subdomains.push(Subdomain {
            id: j,
            elements,
            all_dofs,
            global_to_local,
            internal,
            weights: Vec::new(),
        });
    }

    if let Some(bad) = mu.iter().position(|&m| m == 0) {
        return Err(Error::Coverage(bad));
    }

    let mut decomp = DomainDecomposition {
        n: partition.n,
        mode,
        subdomains,
        mu,
        k0,
    };
    compute_pou_weights(mesh, &mut decomp, layers)?;
    Ok(decomp)
}

/// Fill in partition-of-unity weights.
///
/// Minimal mode uses `w_j(i) = 1/mu_i`. Generous mode uses graph distances
/// to the subdomain exterior, capped at the overlap width and normalised
/// across owners, so the weights vary smoothly over the whole overlap while
/// still summing to one at every dof.
fn compute_pou_weights(
    mesh: &Mesh,
    decomp: &mut DomainDecomposition,
    layers: usize,
) -> Result<()> {
    let n_free = mesh.n_free_dofs();
    match decomp.mode {
        OverlapMode::Minimal { .. } => {
            for sd in &mut decomp.subdomains {
                sd.weights = sd
                    .all_dofs
                    .iter()
                    .zip(&sd.internal)
                    .map(|(&g, &int)| if int { 1.0 / decomp.mu[g] as f64 } else { 0.0 })
                    .collect();
            }
        }
        OverlapMode::Generous { .. } => {
            let cap = (2 * layers).max(1);
            // BFS distance from the exterior of each subdomain, over the
            // node adjacency graph of the mesh.
            let n_nodes = mesh.n_nodes();
            let mut distances: Vec<Vec<usize>> = Vec::with_capacity(decomp.n);
            for sd in &decomp.subdomains {
                let mut in_sd = vec![false; mesh.n_elements()];
                for &e in &sd.elements {
                    in_sd[e] = true;
                }
                // Sources: nodes touching at least one exterior element.
                let mut dist = vec![usize::MAX; n_nodes];
                let mut queue = std::collections::VecDeque::new();
                for node in 0..n_nodes {
                    if mesh.node_elements(node).iter().any(|&e| !in_sd[e]) {
                        dist[node] = 0;
                        queue.push_back(node);
                    }
                }
                while let Some(node) = queue.pop_front() {
                    let d = dist[node];
                    if d >= cap {
                        continue;
                    }
                    for &e in &mesh.node_elements(node) {
                        for &nb in &mesh.element_nodes(e) {
                            if dist[nb] == usize::MAX {
                                dist[nb] = d + 1;
                                queue.push_back(nb);
                            }
                        }
                    }
                }
                // Unreached nodes are deep interior: capped distance.
                for d in dist.iter_mut() {
                    if *d == usize::MAX || *d > cap {
                        *d = cap;
                    }
                }
                distances.push(dist);
            }
            // Shared denominators per dof, over internal owners only.
            let mut denom = vec![0.0f64; n_free];
            for (sd, dist) in decomp.subdomains.iter().zip(&distances) {
                for (local, &g) in sd.all_dofs.iter().enumerate() {
                    if sd.internal[local] {
                        denom[g] += dist[mesh.dof_to_node[g]] as f64;
                    }
                }
            }
            for (sd, dist) in decomp.subdomains.iter_mut().zip(&distances) {
                sd.weights = sd
                    .all_dofs
                    .iter()
                    .zip(&sd.internal)
                    .map(|(&g, &int)| {
                        if int {
                            dist[mesh.dof_to_node[g]] as f64 / denom[g]
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    Ok(())
}

/// Exact maximum over elements of the subdomain membership count.
pub fn compute_k0(decomp: &DomainDecomposition) -> usize {
    decomp.k0
}
