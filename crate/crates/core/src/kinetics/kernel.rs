use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Symmetric table of coagulation rates, indexed by 0-based size index.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    sizes: usize,
    rates: Vec<f64>,
}

impl RateTable {
    /// Row-major `sizes x sizes` matrix. Must be exactly symmetric.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let sizes = rows.len();
        if sizes == 0 {
            return Err(Error::InvalidKernel("empty rate table".into()));
        }
        let mut rates = Vec::with_capacity(sizes * sizes);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != sizes {
                return Err(Error::InvalidKernel(format!(
                    "row {i} has {} entries, expected {sizes}",
                    row.len()
                )));
            }
            rates.extend_from_slice(row);
        }
        let table = Self { sizes, rates };
        table.validate()?;
        Ok(table)
    }

    /// Reads `i,j,rate` rows (sizes are 1-based). The mirrored entry is filled
    /// in when absent; missing pairs are zero; conflicting mirrors are an error.
    pub fn from_csv_reader<R: Read>(reader: R, sizes: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            i: usize,
            j: usize,
            rate: f64,
        }

        if sizes == 0 {
            return Err(Error::InvalidKernel("rate table needs sizes >= 1".into()));
        }
        let mut rates = vec![f64::NAN; sizes * sizes];
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::InvalidKernel(format!("rate csv header: {e}")))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["i", "j", "rate"] {
            return Err(Error::InvalidKernel(format!(
                "rate csv header must be i,j,rate, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row =
                row.map_err(|e| Error::InvalidKernel(format!("rate csv row {}: {e}", line + 2)))?;
            if row.i == 0 || row.j == 0 || row.i > sizes || row.j > sizes {
                return Err(Error::InvalidKernel(format!(
                    "pair ({}, {}) outside sizes 1..={sizes}",
                    row.i, row.j
                )));
            }
            let slot = &mut rates[(row.i - 1) * sizes + (row.j - 1)];
            if !slot.is_nan() && *slot != row.rate {
                return Err(Error::InvalidKernel(format!(
                    "pair ({}, {}) listed twice with different rates",
                    row.i, row.j
                )));
            }
            *slot = row.rate;
        }
        for i in 0..sizes {
            for j in 0..sizes {
                let (a, b) = (rates[i * sizes + j], rates[j * sizes + i]);
                match (a.is_nan(), b.is_nan()) {
                    (true, true) => {
                        rates[i * sizes + j] = 0.0;
                        rates[j * sizes + i] = 0.0;
                    }
                    (true, false) => rates[i * sizes + j] = b,
                    (false, true) => rates[j * sizes + i] = a,
                    (false, false) => {}
                }
            }
        }
        let table = Self { sizes, rates };
        table.validate()?;
        Ok(table)
    }

    pub fn from_csv_path(path: &Path, sizes: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, sizes)
    }

    fn validate(&self) -> Result<()> {
        let n = self.sizes;
        for i in 0..n {
            for j in 0..n {
                let r = self.rates[i * n + j];
                if !(r.is_finite() && r >= 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "rate ({}, {}) = {r} is not a finite nonnegative number",
                        i + 1,
                        j + 1
                    )));
                }
                if r != self.rates[j * n + i] {
                    return Err(Error::InvalidKernel(format!(
                        "rates are not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> usize {
        self.sizes
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.sizes + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    Constant {
        kappa: f64,
    },
    /// `K(i, j) = i + j`
    Additive,
    /// `K(i, j) = i * j`
    Multiplicative,
    Tabulated(RateTable),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Constant { .. } => "constant",
            KernelFamily::Additive => "additive",
            KernelFamily::Multiplicative => "multiplicative",
            KernelFamily::Tabulated(_) => "tabulated",
        }
    }
}

/// Interaction rates plus an optional per-cell rate multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    modulation: Option<Vec<f64>>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Result<Self> {
        if let KernelFamily::Constant { kappa } = family {
            if !(kappa.is_finite() && kappa >= 0.0) {
                return Err(Error::InvalidKernel(format!(
                    "kappa must be >= 0, got {kappa}"
                )));
            }
        }
        Ok(Self {
            family,
            modulation: None,
        })
    }

    pub fn constant(kappa: f64) -> Result<Self> {
        Self::new(KernelFamily::Constant { kappa })
    }

    pub fn with_modulation(mut self, modulation: Vec<f64>) -> Result<Self> {
        if modulation.is_empty() {
            return Err(Error::InvalidKernel(
                "modulation needs at least one cell".into(),
            ));
        }
        if let Some(m) = modulation.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidKernel(format!(
                "modulation entries must be > 0, got {m}"
            )));
        }
        self.modulation = Some(modulation);
        Ok(self)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn modulation(&self) -> Option<&[f64]> {
        self.modulation.as_deref()
    }

    /// Largest cell multiplier (1 when unmodulated).
    pub fn max_modulation(&self) -> f64 {
        self.modulation
            .as_ref()
            .map_or(1.0, |m| m.iter().copied().fold(0.0, f64::max))
    }

    /// Rate for 0-based size indices, before truncation.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        let (si, sj) = ((i + 1) as f64, (j + 1) as f64);
        match &self.family {
            KernelFamily::Constant { kappa } => *kappa,
            KernelFamily::Additive => si + sj,
            KernelFamily::Multiplicative => si * sj,
            KernelFamily::Tabulated(t) => t.rate(i, j),
        }
    }

    /// Row-major `sizes x sizes` rates with pairs whose combined size exceeds
    /// `sizes` set to zero.
    pub fn truncated_rates(&self, sizes: usize) -> Result<Vec<f64>> {
        if let KernelFamily::Tabulated(t) = &self.family {
            if t.sizes() < sizes {
                return Err(Error::InvalidKernel(format!(
                    "rate table covers {} sizes, model needs {sizes}",
                    t.sizes()
                )));
            }
        }
        let mut out = vec![0.0; sizes * sizes];
        for i in 0..sizes {
            for j in 0..sizes {
                if i + j + 2 <= sizes {
                    out[i * sizes + j] = self.rate(i, j);
                }
            }
        }
        Ok(out)
    }
}
