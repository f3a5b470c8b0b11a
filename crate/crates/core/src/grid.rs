//! Uniform right-triangle meshes on axis-aligned rectangles with P1 degrees
//! of freedom and homogeneous Dirichlet boundary handling.

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0,x1] x [y0,y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn unit_square() -> Self {
        Rectangle {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rectangle { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// Uniform triangulation of a rectangle. Each grid cell is split along its
/// bottom-left to top-right diagonal into two counterclockwise triangles.
///
/// Node numbering is row-major (by y, then x). Elements are numbered two per
/// cell: `2*cell` is the lower-right triangle, `2*cell + 1` the upper-left,
/// with `cell = cy*nx + cx`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub rect: Rectangle,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Per-node boundary flag (true on the Dirichlet boundary).
    pub boundary_mask: Vec<bool>,
    /// Node index -> free-dof index, or `None` on the boundary.
    pub free_dofs: Vec<Option<usize>>,
    /// Free-dof index -> node index.
    pub dof_to_node: Vec<usize>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elements(&self) -> usize {
        2 * self.nx * self.ny
    }

    pub fn n_free_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    #[inline]
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * (self.nx + 1) + ix
    }

    #[inline]
    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let ix = node % (self.nx + 1);
        let iy = node / (self.nx + 1);
        (
            self.rect.x0 + ix as f64 * self.h,
            self.rect.y0 + iy as f64 * self.h,
        )
    }

    /// The three vertex nodes of an element, in counterclockwise order.
    #[inline]
    pub fn element_nodes(&self, elem: usize) -> [usize; 3] {
        let cell = elem / 2;
        let cx = cell % self.nx;
        let cy = cell / self.nx;
        let bl = self.node_index(cx, cy);
        let br = self.node_index(cx + 1, cy);
        let tr = self.node_index(cx + 1, cy + 1);
        let tl = self.node_index(cx, cy + 1);
        if elem % 2 == 0 {
            [bl, br, tr]
        } else {
            [bl, tr, tl]
        }
    }

    /// Barycenter of an element.
    pub fn element_barycenter(&self, elem: usize) -> (f64, f64) {
        let nodes = self.element_nodes(elem);
        let mut x = 0.0;
        let mut y = 0.0;
        for &n in &nodes {
            let (px, py) = self.node_coords(n);
            x += px;
            y += py;
        }
        (x / 3.0, y / 3.0)
    }

    pub fn element_area(&self) -> f64 {
        0.5 * self.h * self.h
    }

    /// Cell (cx, cy) of an element.
    #[inline]
    pub fn element_cell(&self, elem: usize) -> (usize, usize) {
        let cell = elem / 2;
        (cell % self.nx, cell / self.nx)
    }

    /// Elements adjacent to a node (up to 6 on this triangulation).
    pub fn node_elements(&self, node: usize) -> Vec<usize> {
        let ix = node % (self.nx + 1);
        let iy = node / (self.nx + 1);
        let mut out = Vec::with_capacity(6);
        // Check the up-to-four cells touching the node.
        for (dcx, dcy) in [(ix.wrapping_sub(1), iy.wrapping_sub(1)), (ix, iy.wrapping_sub(1)), (ix.wrapping_sub(1), iy), (ix, iy)] {
            if dcx >= self.nx || dcy >= self.ny {
                continue;
            }
            let cell = dcy * self.nx + dcx;
            for e in [2 * cell, 2 * cell + 1] {
                if self.element_nodes(e).contains(&node) {
                    out.push(e);
                }
            }
        }
        out
    }
}

/// Build a uniform triangulation of `rect` with `nx` by `ny` square cells.
pub fn build_uniform_mesh(rect: Rectangle, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Dimension { nx, ny });
    }
    let hx = rect.width() / nx as f64;
    let hy = rect.height() / ny as f64;
    if (hx - hy).abs() > 1e-12 * hx.abs().max(hy.abs()) {
        return Err(Error::AspectRatio { hx, hy });
    }
    let n_nodes = (nx + 1) * (ny + 1);
    let mut boundary_mask = vec![false; n_nodes];
    let mut free_dofs = vec![None; n_nodes];
    let mut dof_to_node = Vec::with_capacity(nx.saturating_sub(1) * ny.saturating_sub(1));
    for iy in 0..=ny {
        for ix in 0..=nx {
            let node = iy * (nx + 1) + ix;
            if ix == 0 || ix == nx || iy == 0 || iy == ny {
                boundary_mask[node] = true;
            } else {
                free_dofs[node] = Some(dof_to_node.len());
                dof_to_node.push(node);
            }
        }
    }
    Ok(Mesh {
        rect,
        nx,
        ny,
        h: hx,
        boundary_mask,
        free_dofs,
        dof_to_node,
    })
}

/// The free dof nearest the rectangle centre; ties broken by lowest index.
pub fn centre_node(mesh: &Mesh) -> Result<usize> {
    if mesh.n_free_dofs() == 0 {
        return Err(Error::EmptyInterior);
    }
    let cx = 0.5 * (mesh.rect.x0 + mesh.rect.x1);
    let cy = 0.5 * (mesh.rect.y0 + mesh.rect.y1);
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (dof, &node) in mesh.dof_to_node.iter().enumerate() {
        let (px, py) = mesh.node_coords(node);
        let d = (px - cx).powi(2) + (py - cy).powi(2);
        // Strict improvement keeps the lowest dof index on ties.
        if d < best_d && (best_d - d) > 1e-15 * (1.0 + d) {
            best_d = d;
            best = dof;
        }
    }
    Ok(best)
}

/// Plain-text dump of nodes and elements for debugging.
pub fn dump_mesh<W: std::io::Write>(mesh: &Mesh, w: &mut W) -> Result<()> {
    writeln!(w, "# nodes {}", mesh.n_nodes())?;
    for n in 0..mesh.n_nodes() {
        let (x, y) = mesh.node_coords(n);
        writeln!(w, "{} {:.17} {:.17} {}", n, x, y, mesh.boundary_mask[n] as u8)?;
    }
    writeln!(w, "# elements {}", mesh.n_elements())?;
    for e in 0..mesh.n_elements() {
        let v = mesh.element_nodes(e);
        writeln!(w, "{} {} {} {}", e, v[0], v[1], v[2])?;
    }
    Ok(())
}
