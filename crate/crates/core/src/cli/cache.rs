//! On-disk cache of traced levels, one CSV file per (geometry, t).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green::GreenSolver;
use crate::sublevel::{trace_level_with, LevelComponent, LevelCurveSet, TraceOptions};

pub const LEVEL_CSV_HEADER: &str = "component,x,y,weight,nx,ny,gradnorm";

/// Exact text form of a level; floats use the shortest round-tripping representation.
pub fn level_to_csv(level: &LevelCurveSet) -> String {
    let mut out = String::from(LEVEL_CSV_HEADER);
    out.push('\n');
    for (k, c) in level.components().iter().enumerate() {
        for i in 0..c.len() {
            let (z, n) = (c.nodes[i], c.normals[i]);
            let _ = writeln!(
                out,
                "{k},{:?},{:?},{:?},{:?},{:?},{:?}",
                z.re, z.im, c.weights[i], n.re, n.im, c.grad_norm[i]
            );
        }
    }
    out
}

pub fn level_from_csv(t: f64, text: &str) -> Result<LevelCurveSet> {
    let bad = |line: usize, what: &str| Error::Integrity(format!("level CSV line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == LEVEL_CSV_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    let mut components: Vec<LevelComponent> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(bad(i + 1, "expected 7 fields"));
        }
        let k: usize = fields[0].parse().map_err(|_| bad(i + 1, "bad component index"))?;
        let v = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| bad(i + 1, "bad number"))?;
        if k == components.len() {
            components.push(LevelComponent {
                nodes: Vec::new(),
                weights: Vec::new(),
                normals: Vec::new(),
                grad_norm: Vec::new(),
            });
        } else if k + 1 != components.len() {
            return Err(bad(i + 1, "components out of order"));
        }
        let c = components.last_mut().expect("pushed above");
        c.nodes.push(Complex64::new(v[0], v[1]));
        c.weights.push(v[2]);
        c.normals.push(Complex64::new(v[3], v[4]));
        c.grad_norm.push(v[5]);
    }
    if components.is_empty() {
        return Err(Error::Integrity("level CSV has no nodes".into()));
    }
    LevelCurveSet::from_components(t, components)
}

/// Levels keyed by a geometry fingerprint and the bit pattern of t.
#[derive(Debug, Clone)]
pub struct LevelCache {
    dir: PathBuf,
    key: String,
}

impl LevelCache {
    pub fn new(dir: &Path, key: &str) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            key: key.to_string(),
        })
    }

    pub fn path(&self, t: f64) -> PathBuf {
        self.dir.join(format!("{}_{:016x}.csv", self.key, t.to_bits()))
    }

    pub fn load(&self, t: f64) -> Result<Option<LevelCurveSet>> {
        let path = self.path(t);
        match fs::read_to_string(&path) {
            Ok(text) => level_from_csv(t, &text)
                .map(Some)
                .map_err(|e| Error::Integrity(format!("{}: {e}; delete it or run without the cache", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn store(&self, level: &LevelCurveSet) -> Result<()> {
        let path = self.path(level.t());
        // write then rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, level_to_csv(level))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Cached level, tracing and storing it on a miss.
    pub fn level(&self, solver: &GreenSolver, t: f64, options: &TraceOptions) -> Result<LevelCurveSet> {
        if let Some(level) = self.load(t)? {
            return Ok(level);
        }
        let level = trace_level_with(solver, t, options)?;
        self.store(&level)?;
        Ok(level)
    }
}
