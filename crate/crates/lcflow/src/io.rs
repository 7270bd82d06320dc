// On-disk artifacts: diagnostics CSV, binary field snapshots ("HFLD"),
// rigidity sweep rows, and radially binned energy spectra. All floating
// point values are written with 17 significant decimal digits, which
// round-trips f64 exactly.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::SimState;
use crate::error::{Error, Result};
use crate::field::{DirectorField, Grid2D, ScalarField, VectorField2};
use crate::rigidity::SweepCell;
use crate::spectral::to_spectral;

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// diagnostics CSV

pub const DIAGNOSTICS_HEADER: &str = "t,E,grad_u_sq,tension_sq,grad_d_L4_4,lap_d_sq,inf_d3,\
d_minus_e3_sq,int_u_L4_4,int_grad_d_L4_4,int_lap_d_sq,int_grad_d_sq,int_D,energy_residual,u_L4_4";

const DIAGNOSTICS_COLUMNS: usize = 15;

fn row_values(r: &DiagnosticsRecord) -> [f64; DIAGNOSTICS_COLUMNS] {
    [
        r.t,
        r.e,
        r.grad_u_sq,
        r.tension_sq,
        r.grad_d_l4_4,
        r.lap_d_sq,
        r.inf_d3,
        r.d_minus_e3_sq,
        r.int_u_l4_4,
        r.int_grad_d_l4_4,
        r.int_lap_d_sq,
        r.int_grad_d_sq,
        r.int_d,
        r.energy_residual,
        r.u_l4_4,
    ]
}

fn record_from(v: [f64; DIAGNOSTICS_COLUMNS]) -> DiagnosticsRecord {
    DiagnosticsRecord {
        t: v[0],
        e: v[1],
        grad_u_sq: v[2],
        tension_sq: v[3],
        grad_d_l4_4: v[4],
        lap_d_sq: v[5],
        inf_d3: v[6],
        d_minus_e3_sq: v[7],
        int_u_l4_4: v[8],
        int_grad_d_l4_4: v[9],
        int_lap_d_sq: v[10],
        int_grad_d_sq: v[11],
        int_d: v[12],
        energy_residual: v[13],
        u_l4_4: v[14],
    }
}

/// Render records as CSV text (header plus one line per record).
pub fn diagnostics_to_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity((records.len() + 1) * 24 * DIAGNOSTICS_COLUMNS);
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        let vals = row_values(r);
        for (c, v) in vals.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&fmt17(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_diagnostics(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    fs::write(path, diagnostics_to_csv(records))?;
    Ok(())
}

/// Parse a diagnostics CSV produced by [`write_diagnostics`]. The header
/// must match the pinned column order exactly; malformed rows are reported
/// with their 1-based line number.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let text = fs::read_to_string(path)?;
    parse_diagnostics(&text)
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::ValidationError("empty diagnostics file".into()));
    };
    if header.trim() != DIAGNOSTICS_HEADER {
        return Err(Error::ValidationError(format!(
            "diagnostics header mismatch: got '{}'",
            header.trim()
        )));
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0f64; DIAGNOSTICS_COLUMNS];
        let mut count = 0usize;
        for (c, cell) in line.split(',').enumerate() {
            if c >= DIAGNOSTICS_COLUMNS {
                return Err(Error::ParseError {
                    line: row,
                    msg: format!("more than {DIAGNOSTICS_COLUMNS} columns"),
                });
            }
            vals[c] = cell.trim().parse::<f64>().map_err(|_| Error::ParseError {
                line: row,
                msg: format!("column {} value '{}' is not a number", c + 1, cell.trim()),
            })?;
            count = c + 1;
        }
        if count != DIAGNOSTICS_COLUMNS {
            return Err(Error::ParseError {
                line: row,
                msg: format!("expected {DIAGNOSTICS_COLUMNS} columns, got {count}"),
            });
        }
        records.push(record_from(vals));
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// binary snapshots

const MAGIC: [u8; 4] = *b"HFLD";
pub const SNAPSHOT_VERSION: u32 = 1;
const COMPONENTS: u32 = 5;
const HEADER_BYTES: usize = 4 + 4 + 4 + 8 + 8 + 4;

/// Write the state as: magic "HFLD", u32 version, u32 n, f64 L, f64 t,
/// u32 component count (5), then u1,u2,d1,d2,d3 row-major as f64, all
/// little-endian.
pub fn write_snapshot(state: &SimState, path: &Path) -> Result<()> {
    let grid = state.grid();
    let n = grid.n();
    let mut buf = Vec::with_capacity(HEADER_BYTES + COMPONENTS as usize * n * n * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&grid.length().to_le_bytes());
    buf.extend_from_slice(&state.t().to_le_bytes());
    buf.extend_from_slice(&COMPONENTS.to_le_bytes());
    let comps: [&ScalarField; COMPONENTS as usize] = [
        state.u().comp(0),
        state.u().comp(1),
        state.d().comp(0),
        state.d().comp(1),
        state.d().comp(2),
    ];
    for f in comps {
        for v in f.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::InvariantViolation(format!(
                "snapshot truncated: wanted {} bytes at offset {}, file has {}",
                len,
                self.pos,
                self.buf.len()
            )));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

/// Read a snapshot back, validating the format and the state invariants
/// (unit director, divergence-free velocity, finite samples).
pub fn read_snapshot(path: &Path) -> Result<SimState> {
    let buf = fs::read(path)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.bytes(4)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = cur.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let n = cur.u32()? as usize;
    let l = cur.f64()?;
    let t = cur.f64()?;
    let count = cur.u32()?;
    if count != COMPONENTS {
        return Err(Error::InvariantViolation(format!(
            "snapshot carries {count} components, expected {COMPONENTS}"
        )));
    }
    let grid = Grid2D::new(n, l)?;
    let per_comp = n * n * 8;
    let need = COMPONENTS as usize * per_comp;
    let rest = &buf[cur.pos..];
    if rest.len() < need {
        return Err(Error::InvariantViolation(format!(
            "snapshot truncated: payload is {} bytes, expected {need}",
            rest.len()
        )));
    }
    if rest.len() > need {
        return Err(Error::InvariantViolation(format!(
            "snapshot has {} trailing bytes",
            rest.len() - need
        )));
    }
    let mut fields = Vec::with_capacity(COMPONENTS as usize);
    for c in 0..COMPONENTS as usize {
        let chunk = &rest[c * per_comp..(c + 1) * per_comp];
        let data: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        fields.push(ScalarField::from_data(grid, data)?);
    }
    let mut it = fields.into_iter();
    let u = VectorField2::new(it.next().unwrap(), it.next().unwrap())?;
    let d = DirectorField::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())?;
    SimState::new(t, u, d)
}

// ---------------------------------------------------------------------------
// rigidity sweep CSV

pub const SWEEP_HEADER: &str = "epsilon0,c0,n,L,best_ratio,delta0_estimate,starts,iterations";

pub fn sweep_row(cell: &SweepCell) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        fmt17(cell.epsilon0),
        fmt17(cell.c0),
        cell.n,
        fmt17(cell.length),
        fmt17(cell.best_ratio),
        fmt17(cell.delta0_estimate),
        cell.starts,
        cell.iterations
    )
}

pub fn write_sweep(cells: &[SweepCell], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&sweep_row(cell));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// radially binned energy spectra

/// Energy content of one integer frequency shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    /// Shell index: integer modes (k₁, k₂) with round(|k|) = k.
    pub k: usize,
    /// Kinetic energy in the shell; shells sum to ½‖u‖₂².
    pub e_u: f64,
    /// Director gradient energy in the shell; shells sum to ‖∇d‖₂²
    /// in the first-derivative convention (Nyquist row dropped).
    pub e_grad_d: f64,
}

pub fn shell_spectrum(state: &SimState) -> Vec<SpectrumRow> {
    let grid = state.grid();
    let n = grid.n();
    let l = grid.length();
    let mode = |m: usize| -> i64 {
        if m < n / 2 {
            m as i64
        } else {
            m as i64 - n as i64
        }
    };
    let xi = |m: usize| -> f64 {
        if m == n / 2 {
            0.0
        } else {
            2.0 * PI * mode(m) as f64 / l
        }
    };
    let smax = (2.0f64.sqrt() * n as f64 / 2.0).round() as usize;
    let mut rows: Vec<SpectrumRow> = (0..=smax)
        .map(|k| SpectrumRow {
            k,
            e_u: 0.0,
            e_grad_d: 0.0,
        })
        .collect();
    let parseval = l * l / (n as f64).powi(4);
    let u_hat = [to_spectral(state.u().comp(0)), to_spectral(state.u().comp(1))];
    let d_hat = [
        to_spectral(state.d().comp(0)),
        to_spectral(state.d().comp(1)),
        to_spectral(state.d().comp(2)),
    ];
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (mode(i), mode(j));
            let shell = (((k1 * k1 + k2 * k2) as f64).sqrt()).round() as usize;
            let idx = i * n + j;
            let eu: f64 = u_hat.iter().map(|c| c.data()[idx].norm_sqr()).sum();
            let w = xi(i) * xi(i) + xi(j) * xi(j);
            let ed: f64 = d_hat.iter().map(|c| c.data()[idx].norm_sqr()).sum();
            rows[shell].e_u += 0.5 * parseval * eu;
            rows[shell].e_grad_d += parseval * w * ed;
        }
    }
    rows
}

pub const SPECTRUM_HEADER: &str = "k,e_u,e_grad_d";

pub fn write_spectrum(rows: &[SpectrumRow], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.k, fmt17(r.e_u), fmt17(r.e_grad_d)));
    }
    fs::write(path, out)?;
    Ok(())
}
