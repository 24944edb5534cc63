use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::level_set::LevelSet;
use crate::mesh::Mesh;
use crate::vtk::{self, Attributes};

use super::config::Config;
use super::history::History;
use super::run::{Discretization, Pass};

/// Writes run artifacts into one directory.
#[derive(Clone, Debug)]
pub struct Exporter {
    dir: PathBuf,
}

fn flags(strong: &[bool]) -> Vec<f64> {
    strong.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect()
}

fn vertex_psi(psi: &LevelSet, mesh: &Mesh) -> Vec<f64> {
    mesh.vertices().iter().map(|&p| psi.bilinear(p)).collect()
}

impl Exporter {
    pub fn create(dir: &Path) -> Result<Exporter> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Exporter {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `config.json` with every default resolved.
    pub fn write_config(&self, config: &Config) -> Result<()> {
        let mut text = serde_json::to_string_pretty(config)?;
        text.push('\n');
        vtk::write(&self.dir.join("config.json"), &text)
    }

    pub fn write_history(&self, history: &History) -> Result<()> {
        history.write_csv(&self.dir.join("history.csv"))
    }

    /// `snapshot_<k>.vtk`: mesh, material flags, mean indicators, ψ and the
    /// mean descent direction.
    pub fn write_snapshot(&self, k: usize, psi: &LevelSet, pass: &Pass, disc: &Discretization) -> Result<()> {
        let mesh = &disc.mesh;
        let material = flags(&pass.strong);
        let psi_v = vertex_psi(psi, mesh);
        let theta: Vec<[f64; 2]> = pass.mean_theta.chunks(2).map(|c| [c[0], c[1]]).collect();
        let data = Attributes {
            cell_scalars: vec![("material", &material), ("eta_c", &pass.eta_c), ("eta_d", &pass.eta_d)],
            point_scalars: vec![("psi", &psi_v)],
            point_vectors: vec![("theta", &theta)],
        };
        let text = vtk::unstructured_grid(mesh, &format!("iteration {k}"), &data)?;
        vtk::write(&self.dir.join(format!("snapshot_{k}.vtk")), &text)
    }

    /// `final_design.vtk` (mesh with material flags) and `final_level_set.vtk`.
    pub fn write_final(&self, psi: &LevelSet, mesh: &Mesh, strong: &[bool]) -> Result<()> {
        let material = flags(strong);
        let psi_v = vertex_psi(psi, mesh);
        let data = Attributes {
            cell_scalars: vec![("material", &material)],
            point_scalars: vec![("psi", &psi_v)],
            point_vectors: vec![],
        };
        let text = vtk::unstructured_grid(mesh, "final design", &data)?;
        vtk::write(&self.dir.join("final_design.vtk"), &text)?;
        vtk::write(
            &self.dir.join("final_level_set.vtk"),
            &vtk::structured_points(psi, "final level set"),
        )
    }
}
