//! Point-cloud processing around the stem: labeled clouds, the two-segment
//! stem model, Fibonacci sphere sampling and the free-space target search.

mod free_space;
mod lattice;
mod stem;

pub use free_space::{
    compute_free_space, select_free_space_target, select_obstacles, FreeSpaceResult, ObstacleSet,
};
pub use lattice::{fibonacci_lattice, fibonacci_unit_point, nearest_lattice_index};
pub use stem::{cluster_stem, compute_stem_base, fit_segment, model_stem, SegmentFit, StemModel};

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// CSV header of the scene format.
pub const SCENE_HEADER: &str = "x,y,z,label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Other,
    Stem,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Other => 0,
            Label::Stem => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Other),
            1 => Some(Label::Stem),
            _ => None,
        }
    }
}

/// Scene points (world frame, meters) with one semantic label each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCloud {
    points: Vec<Vec3>,
    labels: Vec<Label>,
}

impl LabeledCloud {
    pub fn new(points: Vec<Vec3>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Scene(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Scene("non-finite coordinate".into()));
        }
        Ok(Self { points, labels })
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            labels: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, p: Vec3, label: Label) {
        self.points.push(p);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, Label)> {
        self.points.iter().zip(self.labels.iter().copied())
    }

    /// Points carrying `label`, in cloud order.
    pub fn with_label(&self, label: Label) -> Vec<Vec3> {
        self.iter()
            .filter(|(_, l)| *l == label)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(32 * (self.len() + 1));
        s.push_str(SCENE_HEADER);
        s.push('\n');
        for (p, l) in self.iter() {
            let _ = writeln!(s, "{},{},{},{}", p.x, p.y, p.z, l.code());
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Parses the `x,y,z,label` format. Errors carry 1-based line numbers.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut cloud = LabeledCloud::default();
        let mut saw_header = false;
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                let cols: Vec<&str> = trimmed.split(',').map(str::trim).collect();
                if cols != ["x", "y", "z", "label"] {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected header `{SCENE_HEADER}`, got `{trimmed}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let (p, l) = parse_row(trimmed).map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
            cloud.push(p, l);
        }
        if cloud.is_empty() {
            return Err(Error::Scene("no points".into()));
        }
        Ok(cloud)
    }
}

fn parse_row(row: &str) -> std::result::Result<(Vec3, Label), String> {
    let cols: Vec<&str> = row.split(',').map(str::trim).collect();
    if cols.len() != 4 {
        return Err(format!("expected 4 columns, got {}", cols.len()));
    }
    let mut xyz = [0.0; 3];
    for (dst, col) in xyz.iter_mut().zip(&cols[..3]) {
        let v: f64 = col
            .parse()
            .map_err(|_| format!("invalid coordinate `{col}`"))?;
        if !v.is_finite() {
            return Err(format!("non-finite coordinate `{col}`"));
        }
        *dst = v;
    }
    let label = cols[3]
        .parse::<u8>()
        .ok()
        .and_then(Label::from_code)
        .ok_or_else(|| format!("invalid label `{}` (expected 0 = other or 1 = stem)", cols[3]))?;
    Ok((Vec3::new(xyz[0], xyz[1], xyz[2]), label))
}

/// Summary of a validated scene file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneReport {
    pub n_points: usize,
    pub n_stem: usize,
    pub n_other: usize,
}

impl std::fmt::Display for SceneReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "OK: n_W = {} points (stem n_S = {}, other = {})",
            self.n_points, self.n_stem, self.n_other
        )
    }
}

/// Checks schema, labels and finiteness of a scene CSV file.
pub fn validate_scene(path: impl AsRef<Path>) -> Result<SceneReport> {
    let cloud = LabeledCloud::read_csv(path)?;
    Ok(SceneReport {
        n_points: cloud.len(),
        n_stem: cloud.count(Label::Stem),
        n_other: cloud.count(Label::Other),
    })
}
