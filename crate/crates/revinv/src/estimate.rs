//! Closed-form resource model: width formulas, leading-order gate counts
//! per location-controlled block class, and the ECDLP roll-up via windowed
//! point additions.

use crate::exact::C_APPROX;
use serde::Serialize;

/// A leading coefficient of the form a*c + b (c = 1/log2 phi), kept
/// symbolic so identities check exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coeff {
    pub c_mul: i64,
    pub konst: i64,
}

impl Coeff {
    pub fn value(&self) -> f64 {
        self.c_mul as f64 * C_APPROX + self.konst as f64
    }
}

/// Per-block Toffoli coefficients of the n^2 log2 n leading term, before
/// the forward+reverse loop doubling.
pub const BLOCK_COEFFS: [(&str, Coeff); 5] = [
    (
        "r-addsub",
        Coeff {
            c_mul: 32,
            konst: 8,
        },
    ),
    ("loc-swap", Coeff { c_mul: 4, konst: 1 }),
    (
        "t-addsub",
        Coeff {
            c_mul: 32,
            konst: -16,
        },
    ),
    ("len-lt", Coeff { c_mul: 6, konst: 0 }),
    (
        "len-lrp",
        Coeff {
            c_mul: 6,
            konst: -6,
        },
    ),
];

/// Both loops of the full algorithm run every step circuit.
pub const LOOP_MULTIPLIER: u64 = 2;

pub fn coeff_sum() -> Coeff {
    let mut acc = Coeff { c_mul: 0, konst: 0 };
    for (_, c) in BLOCK_COEFFS {
        acc.c_mul += c.c_mul;
        acc.konst += c.konst;
    }
    acc
}

/// Inversion circuit width: 3n + 4*floor(log2 n) + 20.
pub fn inversion_width(n: u32) -> u64 {
    assert!(n >= 3);
    3 * n as u64 + 4 * n.ilog2() as u64 + 20
}

/// Full ECDLP width: 5n + 4*floor(log2 n) + 21 (constant fitted to the
/// reported concrete qubit counts).
pub fn ecdlp_width(n: u32) -> u64 {
    assert!(n >= 3);
    5 * n as u64 + 4 * n.ilog2() as u64 + 21
}

/// Leading-term Toffoli count of one modular inversion:
/// 2*(80c-13) n^2 log2 n (approximately 204 n^2 log2 n).
pub fn inversion_toffoli_leading(n: u32) -> f64 {
    let s = coeff_sum();
    LOOP_MULTIPLIER as f64 * s.value() * (n as f64).powi(2) * (n as f64).log2()
}

/// Leading-term CNOT count (about half the Toffoli term).
pub fn inversion_cnot_leading(n: u32) -> f64 {
    inversion_toffoli_leading(n) / 2.0
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockLeading {
    pub block: String,
    pub coeff_c: i64,
    pub coeff_const: i64,
    pub coeff_value: f64,
    pub toffoli_leading: f64,
}

/// Per-block leading Toffoli terms (loop multiplier included).
pub fn per_block_breakdown(n: u32) -> Vec<BlockLeading> {
    let scale = LOOP_MULTIPLIER as f64 * (n as f64).powi(2) * (n as f64).log2();
    BLOCK_COEFFS
        .iter()
        .map(|(name, c)| BlockLeading {
            block: name.to_string(),
            coeff_c: c.c_mul,
            coeff_const: c.konst,
            coeff_value: c.value(),
            toffoli_leading: c.value() * scale,
        })
        .collect()
}

/// One controlled affine point addition: 4 divisions (each one inversion
/// plus one multiplication), 4 further multiplications and 1 squaring;
/// leading coefficient 4*204 + 4*32 + 32 = 976 on n^2 log2 n.
pub const POINT_ADD_INVERSIONS: u64 = 4;
pub const POINT_ADD_MULS: u64 = 4;
pub const POINT_ADD_SQUARINGS: u64 = 1;
pub const MUL_COEFF: u64 = 32;
pub const INV_COEFF_ROUNDED: u64 = 204;

pub fn point_addition_coeff() -> u64 {
    POINT_ADD_INVERSIONS * INV_COEFF_ROUNDED
        + POINT_ADD_MULS * MUL_COEFF
        + POINT_ADD_SQUARINGS * MUL_COEFF
}

#[derive(Debug, Clone, Serialize)]
pub struct EcdlpTotals {
    pub n: u32,
    pub window_size: u32,
    pub window_count: f64,
    /// Leading Toffoli term of one windowed point addition.
    pub point_addition_toffoli: f64,
    /// Dominant total; equals 976 n^3 when w = 2 log2 n.
    pub total_toffoli: f64,
    /// Per-window table-lookup overhead, excluded from the leading term.
    pub lookup_overhead_per_window: f64,
    pub qubits: u64,
}

/// ECDLP roll-up with signed windows of size w over the 2n control bits.
pub fn ecdlp_totals(n: u32, w: u32) -> EcdlpTotals {
    assert!(n >= 8 && w >= 1);
    let nf = n as f64;
    let point_add = point_addition_coeff() as f64 * nf * nf * nf.log2();
    let windows = 2.0 * nf / w as f64;
    EcdlpTotals {
        n,
        window_size: w,
        window_count: windows,
        point_addition_toffoli: point_add,
        total_toffoli: windows * point_add,
        lookup_overhead_per_window: 2f64.powi(w as i32),
        qubits: ecdlp_width(n),
    }
}

pub fn default_window(n: u32) -> u32 {
    (2.0 * (n as f64).log2()).round() as u32
}

/// Leading total with a real-valued window size (2n/w windows of
/// 976 n^2 log2 n): at w = 2 log2 n this is exactly 976 n^3.
pub fn ecdlp_total_at_window(n: u32, w: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf / w * point_addition_coeff() as f64 * nf * nf * nf.log2()
}

/// Provenance of a report cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Model,
    Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub n: u32,
    pub inversion_width: u64,
    pub ecdlp_width: u64,
    pub toffoli_leading: f64,
    pub cnot_leading: f64,
    /// Reported modular-inversion gate counts, units of 10^8.
    pub reference_toffoli_1e8: Option<f64>,
    pub reference_cnot_1e8: Option<f64>,
    /// Reported ECDLP qubit count for this curve size.
    pub reference_ecdlp_qubits: Option<u64>,
    pub measured_toffoli: Option<u64>,
    pub measured_cnot: Option<u64>,
}

/// Reference Toffoli/CNOT counts (units of 10^8) for modular inversion.
pub const REFERENCE_COUNTS_1E8: [(u32, f64, f64); 8] = [
    (64, 0.10, 0.07),
    (128, 0.44, 0.32),
    (160, 0.78, 0.54),
    (192, 1.12, 0.77),
    (224, 1.51, 1.04),
    (256, 1.97, 1.36),
    (384, 3.53, 3.28),
    (512, 6.24, 5.82),
];

/// Reference total qubit counts for the full algorithm per curve size.
pub const REFERENCE_ECDLP_QUBITS: [(u32, u64); 6] = [
    (160, 849),
    (192, 1009),
    (224, 1169),
    (256, 1333),
    (384, 1973),
    (521, 2662),
];

/// Qubit-count comparison rows for prior low-width constructions, kept as
/// static references.
pub const COMPARATOR_WIDTHS: [(&str, &str); 4] = [
    (
        "register-sharing bound (no circuit)",
        "3n + 8*sqrt(n) + 4*log2(n) + O(1)",
    ),
    ("no-sharing bound (no circuit)", "5n + 4*log2(n) + O(1)"),
    ("prior circuit A", "7n + 2*log2(n) + O(1)"),
    ("prior circuit B", "7n + log2(n) + O(1)"),
];

pub fn table_report(ns: &[u32]) -> Vec<ReportRow> {
    ns.iter()
        .map(|&n| {
            let reference = REFERENCE_COUNTS_1E8
                .iter()
                .find(|(rn, _, _)| *rn == n)
                .copied();
            let ecdlp_ref = REFERENCE_ECDLP_QUBITS
                .iter()
                .find(|(rn, _)| *rn == n)
                .map(|(_, q)| *q);
            ReportRow {
                n,
                inversion_width: inversion_width(n),
                ecdlp_width: ecdlp_width(n),
                toffoli_leading: inversion_toffoli_leading(n),
                cnot_leading: inversion_cnot_leading(n),
                reference_toffoli_1e8: reference.map(|(_, t, _)| t),
                reference_cnot_1e8: reference.map(|(_, _, c)| c),
                reference_ecdlp_qubits: ecdlp_ref,
                measured_toffoli: None,
                measured_cnot: None,
            }
        })
        .collect()
}

pub fn default_report_sizes() -> Vec<u32> {
    vec![64, 128, 160, 192, 224, 256, 384, 512, 521]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_formulas() {
        assert_eq!(inversion_width(256), 820);
        assert_eq!(inversion_width(8), 24 + 12 + 20);
        assert_eq!(ecdlp_width(256), 1333);
        for (n, q) in REFERENCE_ECDLP_QUBITS {
            assert_eq!(ecdlp_width(n), q, "n={n}");
        }
        // The fitted constant: 1333 - 5*256 - 4*8 = 21.
        assert_eq!(1333 - 5 * 256 - 4 * 8, 21);
    }

    #[test]
    fn coefficient_identities() {
        let s = coeff_sum();
        assert_eq!((s.c_mul, s.konst), (80, -13));
        let total = LOOP_MULTIPLIER as f64 * s.value();
        assert!((total - 204.47).abs() < 0.1, "total {total}");
        assert_eq!(point_addition_coeff(), 976);
    }

    #[test]
    fn ecdlp_totals_shape() {
        // At w = 2 log2 n the dominant total is 976 n^3.
        for n in [64u32, 256, 512] {
            let w = default_window(n);
            assert_eq!(w, 2 * n.ilog2());
            let t = ecdlp_totals(n, w);
            let expect = 976.0 * (n as f64).powi(3);
            assert!((t.total_toffoli / expect - 1.0).abs() < 1e-9, "n={n}");
        }
        // w = 1 degenerates to 2n full point additions.
        let t1 = ecdlp_totals(64, 1);
        assert_eq!(t1.window_count, 128.0);
    }

    #[test]
    fn leading_term_magnitude() {
        // n = 256: about 204 * 65536 * 8 = 1.07e8, well under the reported
        // 1.97e8 measurement (lower-order terms matter).
        let lead = inversion_toffoli_leading(256);
        assert!(lead > 1.0e8 && lead < 1.2e8, "{lead}");
    }

    #[test]
    fn report_rows() {
        let rows = table_report(&default_report_sizes());
        let r64 = rows.iter().find(|r| r.n == 64).unwrap();
        assert_eq!(r64.reference_toffoli_1e8, Some(0.10));
        let r512 = rows.iter().find(|r| r.n == 512).unwrap();
        assert_eq!(r512.reference_toffoli_1e8, Some(6.24));
        let r521 = rows.iter().find(|r| r.n == 521).unwrap();
        assert_eq!(r521.reference_ecdlp_qubits, Some(2662));
        assert_eq!(r521.reference_toffoli_1e8, None);
    }
}
