//! Residual bookkeeping shared by the validation routines: per-condition
//! maxima over sample points, with point counts for reporting.

#[derive(Debug, Clone, Default)]
pub struct ResidualReport {
    pub entries: Vec<(String, f64, usize)>,
}

impl ResidualReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fold one observed residual into the named condition.
    pub fn record(&mut self, name: &str, residual: f64, points: usize) {
        match self.entries.iter_mut().find(|(n, _, _)| n == name) {
            Some((_, max, count)) => {
                *max = max.max(residual);
                *count += points;
            }
            None => self.entries.push((name.to_string(), residual, points)),
        }
    }

    pub fn merge(&mut self, other: &ResidualReport) {
        for (name, max, count) in &other.entries {
            self.record(name, *max, *count);
        }
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().map(|(_, m, _)| *m).fold(0.0, f64::max)
    }

    pub fn max_of(&self, name: &str) -> f64 {
        self.entries
            .iter()
            .filter(|(n, _, _)| n == name)
            .map(|(_, m, _)| *m)
            .fold(0.0, f64::max)
    }

    pub fn points(&self) -> usize {
        self.entries.iter().map(|(_, _, c)| *c).sum()
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}
