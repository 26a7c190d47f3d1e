//! Gate-level IR for Toffoli networks: polarity-aware controlled NOT/SWAP
//! gates, ordered gate streams, classical basis-state simulation, lowering
//! to the {X, CNOT, CCX} basis, counting and text/JSON serialization.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// A control wire with polarity. `positive = true` means the gate fires when
/// the wire is 1; `positive = false` fires on 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub wire: u32,
    pub positive: bool,
}

impl Control {
    pub fn pos(wire: u32) -> Self {
        Control {
            wire,
            positive: true,
        }
    }
    pub fn neg(wire: u32) -> Self {
        Control {
            wire,
            positive: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    /// Flip `targets[0]` when all controls match.
    Not,
    /// Exchange `targets[0]` and `targets[1]` when all controls match.
    Swap,
}

/// One reversible gate. At most 3 controls; gates are their own inverses.
///
/// Kept flat (fixed-size arrays) so synthesis can stream billions of gates
/// without heap traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    targets: [u32; 2],
    controls: [Control; 3],
    nctrl: u8,
}

impl Gate {
    fn new(kind: GateKind, targets: [u32; 2], ctrls: &[Control]) -> Self {
        assert!(ctrls.len() <= 3, "at most 3 controls per gate");
        let mut controls = [Control::pos(0); 3];
        controls[..ctrls.len()].copy_from_slice(ctrls);
        let g = Gate {
            kind,
            targets,
            controls,
            nctrl: ctrls.len() as u8,
        };
        g.check_distinct();
        g
    }

    fn check_distinct(&self) {
        let mut wires: Vec<u32> = self.wires().collect();
        wires.sort_unstable();
        for w in wires.windows(2) {
            assert!(w[0] != w[1], "duplicate wire {} in gate", w[0]);
        }
    }

    pub fn x(target: u32) -> Self {
        Gate::new(GateKind::Not, [target, target], &[])
    }
    pub fn cx(control: u32, target: u32) -> Self {
        Gate::new(GateKind::Not, [target, target], &[Control::pos(control)])
    }
    pub fn ccx(c1: u32, c2: u32, target: u32) -> Self {
        Gate::new(
            GateKind::Not,
            [target, target],
            &[Control::pos(c1), Control::pos(c2)],
        )
    }
    pub fn not_with(controls: &[Control], target: u32) -> Self {
        Gate::new(GateKind::Not, [target, target], controls)
    }
    pub fn swap(a: u32, b: u32) -> Self {
        Gate::new(GateKind::Swap, [a, b], &[])
    }
    pub fn cswap(control: u32, a: u32, b: u32) -> Self {
        Gate::new(GateKind::Swap, [a, b], &[Control::pos(control)])
    }
    pub fn swap_with(controls: &[Control], a: u32, b: u32) -> Self {
        Gate::new(GateKind::Swap, [a, b], controls)
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls[..self.nctrl as usize]
    }
    pub fn target(&self) -> u32 {
        self.targets[0]
    }
    pub fn swap_targets(&self) -> (u32, u32) {
        (self.targets[0], self.targets[1])
    }
    pub fn num_targets(&self) -> usize {
        match self.kind {
            GateKind::Not => 1,
            GateKind::Swap => 2,
        }
    }

    pub fn wires(&self) -> impl Iterator<Item = u32> + '_ {
        self.targets[..self.num_targets()]
            .iter()
            .copied()
            .chain(self.controls().iter().map(|c| c.wire))
    }

    pub fn max_wire(&self) -> u32 {
        self.wires().max().unwrap()
    }

    /// Classical action on a basis state.
    pub fn apply(&self, bits: &mut BitState) {
        for c in self.controls() {
            if bits.get(c.wire) != c.positive {
                return;
            }
        }
        match self.kind {
            GateKind::Not => bits.flip(self.targets[0]),
            GateKind::Swap => bits.swap(self.targets[0], self.targets[1]),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match (self.kind, self.nctrl) {
            (GateKind::Not, 0) => "x",
            (GateKind::Not, 1) => "cx",
            (GateKind::Not, 2) => "ccx",
            (GateKind::Not, _) => "cccx",
            (GateKind::Swap, 0) => "swap",
            (GateKind::Swap, _) => "cswap",
        };
        write!(f, "{name}")?;
        for c in self.controls() {
            if c.positive {
                write!(f, " {}", c.wire)?;
            } else {
                write!(f, " !{}", c.wire)?;
            }
        }
        for t in &self.targets[..self.num_targets()] {
            write!(f, " {t}")?;
        }
        Ok(())
    }
}

/// Classical basis state: one bit per wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitState {
    words: Vec<u64>,
    width: usize,
}

impl BitState {
    pub fn zeros(width: usize) -> Self {
        BitState {
            words: vec![0; width.div_ceil(64)],
            width,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = BitState::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.set(i as u32, true);
            }
        }
        s
    }

    pub fn from_str_bits(s: &str) -> Result<Self, IrError> {
        let bits: Result<Vec<bool>, _> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(IrError::BadBit(other)),
            })
            .collect();
        Ok(BitState::from_bits(&bits?))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, wire: u32) -> bool {
        let w = wire as usize;
        debug_assert!(w < self.width);
        (self.words[w >> 6] >> (w & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, wire: u32, v: bool) {
        let w = wire as usize;
        debug_assert!(w < self.width);
        if v {
            self.words[w >> 6] |= 1 << (w & 63);
        } else {
            self.words[w >> 6] &= !(1 << (w & 63));
        }
    }

    #[inline]
    pub fn flip(&mut self, wire: u32) {
        let w = wire as usize;
        debug_assert!(w < self.width);
        self.words[w >> 6] ^= 1 << (w & 63);
    }

    #[inline]
    pub fn swap(&mut self, a: u32, b: u32) {
        let va = self.get(a);
        let vb = self.get(b);
        if va != vb {
            self.flip(a);
            self.flip(b);
        }
    }

    /// Read wires `[lo, lo+len)` as an unsigned little-endian integer.
    pub fn read_le(&self, lo: u32, len: u32) -> u64 {
        let mut v = 0u64;
        for i in 0..len {
            if self.get(lo + i) {
                v |= 1 << i;
            }
        }
        v
    }

    pub fn write_le(&mut self, lo: u32, len: u32, value: u64) {
        for i in 0..len {
            self.set(lo + i, (value >> i) & 1 == 1);
        }
    }

    pub fn is_zero_range(&self, lo: u32, len: u32) -> bool {
        (0..len).all(|i| !self.get(lo + i))
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.width as u32)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum IrError {
    #[error("bit character {0:?} is not 0 or 1")]
    BadBit(char),
    #[error("input has {got} bits but circuit width is {want}")]
    WidthMismatch { got: usize, want: usize },
    #[error("gate {gate} has {n} controls; lowering supports at most 2")]
    TooManyControls { gate: String, n: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("gate {gate} is not in the lowered x/cx/ccx basis")]
    NotLowered { gate: String },
}

/// Consumer of a synthesized gate stream. Counting and serialization work
/// without materializing the gate list; `Circuit` is just the Vec-backed sink.
pub trait GateSink {
    fn gate(&mut self, g: Gate);
    /// Structural marker: `begin_block`/`end_block` bracket a named circuit
    /// region ("# begin <label>" comments in the text format).
    fn begin_block(&mut self, _label: &str) {}
    fn end_block(&mut self) {}
}

impl<S: GateSink + ?Sized> GateSink for &mut S {
    fn gate(&mut self, g: Gate) {
        (**self).gate(g)
    }
    fn begin_block(&mut self, label: &str) {
        (**self).begin_block(label)
    }
    fn end_block(&mut self) {
        (**self).end_block()
    }
}

/// Marker entry interleaved with gates in a materialized circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    Begin(String),
    End,
}

/// An ordered gate list with a wire count and optional named wire regions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub width: u32,
    pub gates: Vec<Gate>,
    /// (gate index, marker): marker sits before the gate at that index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<(usize, Marker)>,
    /// Named register map: register name -> wire indices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layout: Vec<(String, Vec<u32>)>,
}

impl Circuit {
    pub fn new(width: u32) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
            markers: Vec::new(),
            layout: Vec::new(),
        }
    }

    pub fn push(&mut self, g: Gate) {
        debug_assert!(
            g.max_wire() < self.width,
            "gate {g} exceeds width {}",
            self.width
        );
        self.gates.push(g);
    }

    /// Classical semantics on a basis state.
    pub fn apply(&self, bits: &BitState) -> Result<BitState, IrError> {
        if bits.width() != self.width as usize {
            return Err(IrError::WidthMismatch {
                got: bits.width(),
                want: self.width as usize,
            });
        }
        let mut out = bits.clone();
        self.apply_in_place(&mut out);
        Ok(out)
    }

    pub fn apply_in_place(&self, bits: &mut BitState) {
        for g in &self.gates {
            g.apply(bits);
        }
    }

    /// Structural inverse: gate order reversed (every gate is self-inverse).
    pub fn invert(&self) -> Circuit {
        let n = self.gates.len();
        let mut markers: Vec<(usize, Marker)> = self
            .markers
            .iter()
            .map(|(i, m)| {
                let m = match m {
                    Marker::Begin(_) => Marker::End,
                    Marker::End => Marker::Begin(String::new()),
                };
                (n - i, m)
            })
            .collect();
        // Marker names do not survive inversion cleanly; drop unnamed Begins.
        markers.retain(|(_, m)| !matches!(m, Marker::Begin(s) if s.is_empty()));
        Circuit {
            width: self.width,
            gates: self.gates.iter().rev().copied().collect(),
            markers,
            layout: self.layout.clone(),
        }
    }

    /// Lower to positive-control {X, CNOT, CCX}. Negative controls are
    /// conjugated by X on the control wire; SWAP becomes 3 CNOT and a
    /// singly-controlled SWAP becomes CNOT·CCX·CNOT. Gates with 3 controls
    /// (or controlled swaps needing them) are rejected; synthesis keeps
    /// everything at 2 controls via scratch wires.
    pub fn lower(&self) -> Result<Circuit, IrError> {
        let mut out = Circuit::new(self.width);
        out.layout = self.layout.clone();
        let mut midx = 0;
        for (i, g) in self.gates.iter().enumerate() {
            while midx < self.markers.len() && self.markers[midx].0 == i {
                out.markers
                    .push((out.gates.len(), self.markers[midx].1.clone()));
                midx += 1;
            }
            lower_gate(*g, &mut |lg| out.gates.push(lg))?;
        }
        while midx < self.markers.len() {
            out.markers
                .push((out.gates.len(), self.markers[midx].1.clone()));
            midx += 1;
        }
        Ok(out)
    }

    /// Exact counts by kind; requires a lowered circuit.
    pub fn count(&self) -> Result<ResourceReport, IrError> {
        let mut counter = CountSink::new();
        for g in &self.gates {
            counter.count_lowered(*g)?;
        }
        Ok(counter.into_report(self.width))
    }

    pub fn serialize_text(&self) -> Result<String, IrError> {
        let mut s = format!("width={}\n", self.width);
        let mut midx = 0;
        let mut depth = 0usize;
        for (i, g) in self.gates.iter().enumerate() {
            while midx < self.markers.len() && self.markers[midx].0 == i {
                match &self.markers[midx].1 {
                    Marker::Begin(label) => {
                        s.push_str(&format!("# begin {label}\n"));
                        depth += 1;
                    }
                    Marker::End => {
                        s.push_str("# end\n");
                        depth = depth.saturating_sub(1);
                    }
                }
                midx += 1;
            }
            check_lowered(g)?;
            s.push_str(&format!("{g}\n"));
        }
        while midx < self.markers.len() {
            match &self.markers[midx].1 {
                Marker::Begin(label) => s.push_str(&format!("# begin {label}\n")),
                Marker::End => s.push_str("# end\n"),
            }
            midx += 1;
        }
        let _ = depth;
        Ok(s)
    }

    pub fn parse_text(text: &str) -> Result<Circuit, IrError> {
        let mut width: Option<u32> = None;
        let mut c = Circuit::new(0);
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let t = raw.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(label) = rest.strip_prefix("begin ") {
                    c.markers
                        .push((c.gates.len(), Marker::Begin(label.trim().to_string())));
                } else if rest == "end" {
                    c.markers.push((c.gates.len(), Marker::End));
                }
                continue;
            }
            if let Some(w) = t.strip_prefix("width=") {
                let w: u32 = w.trim().parse().map_err(|e| IrError::Parse {
                    line,
                    msg: format!("bad width: {e}"),
                })?;
                width = Some(w);
                c.width = w;
                continue;
            }
            let mut parts = t.split_whitespace();
            let op = parts.next().unwrap();
            let args: Result<Vec<u32>, _> = parts.map(|p| p.parse::<u32>()).collect();
            let args = args.map_err(|e| IrError::Parse {
                line,
                msg: format!("bad index: {e}"),
            })?;
            let want = |k: usize| -> Result<(), IrError> {
                if args.len() == k {
                    Ok(())
                } else {
                    Err(IrError::Parse {
                        line,
                        msg: format!("{op} expects {k} indices, got {}", args.len()),
                    })
                }
            };
            let w = width.ok_or(IrError::Parse {
                line,
                msg: "missing width= header".into(),
            })?;
            let gate = match op {
                "x" => {
                    want(1)?;
                    Gate::x(args[0])
                }
                "cx" => {
                    want(2)?;
                    if args[0] == args[1] {
                        return Err(IrError::Parse {
                            line,
                            msg: "duplicate wire in cx".into(),
                        });
                    }
                    Gate::cx(args[0], args[1])
                }
                "ccx" => {
                    want(3)?;
                    if args[0] == args[1] || args[0] == args[2] || args[1] == args[2] {
                        return Err(IrError::Parse {
                            line,
                            msg: "duplicate wire in ccx".into(),
                        });
                    }
                    Gate::ccx(args[0], args[1], args[2])
                }
                other => {
                    return Err(IrError::Parse {
                        line,
                        msg: format!("unknown gate {other:?}"),
                    })
                }
            };
            if gate.max_wire() >= w {
                return Err(IrError::Parse {
                    line,
                    msg: format!("wire out of range (width {w})"),
                });
            }
            c.gates.push(gate);
        }
        if width.is_none() {
            return Err(IrError::Parse {
                line: 0,
                msg: "missing width= header".into(),
            });
        }
        Ok(c)
    }
}

fn check_lowered(g: &Gate) -> Result<(), IrError> {
    let ok =
        matches!(g.kind, GateKind::Not) && g.nctrl <= 2 && g.controls().iter().all(|c| c.positive);
    if ok {
        Ok(())
    } else {
        Err(IrError::NotLowered {
            gate: g.to_string(),
        })
    }
}

/// Lower one IR gate into the {X, CNOT, CCX} basis, emitting via `out`.
pub fn lower_gate(g: Gate, out: &mut impl FnMut(Gate)) -> Result<(), IrError> {
    let ctrls = g.controls();
    if ctrls.len() > 2 {
        return Err(IrError::TooManyControls {
            gate: g.to_string(),
            n: ctrls.len(),
        });
    }
    // Conjugate negative controls with X.
    let negs: Vec<u32> = ctrls
        .iter()
        .filter(|c| !c.positive)
        .map(|c| c.wire)
        .collect();
    for &w in &negs {
        out(Gate::x(w));
    }
    let pos: Vec<u32> = ctrls.iter().map(|c| c.wire).collect();
    match g.kind {
        GateKind::Not => {
            let t = g.target();
            match pos.len() {
                0 => out(Gate::x(t)),
                1 => out(Gate::cx(pos[0], t)),
                _ => out(Gate::ccx(pos[0], pos[1], t)),
            }
        }
        GateKind::Swap => {
            let (a, b) = g.swap_targets();
            match pos.len() {
                0 => {
                    out(Gate::cx(a, b));
                    out(Gate::cx(b, a));
                    out(Gate::cx(a, b));
                }
                1 => {
                    out(Gate::cx(b, a));
                    out(Gate::ccx(pos[0], a, b));
                    out(Gate::cx(b, a));
                }
                _ => {
                    return Err(IrError::TooManyControls {
                        gate: g.to_string(),
                        n: pos.len(),
                    })
                }
            }
        }
    }
    for &w in &negs {
        out(Gate::x(w));
    }
    Ok(())
}

/// Toffoli/CNOT/X counts with an optional per-block breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub width: u32,
    pub toffoli: u64,
    pub cnot: u64,
    pub x: u64,
    pub lowered: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_block: Vec<(String, BlockCount)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCount {
    pub toffoli: u64,
    pub cnot: u64,
    pub x: u64,
}

impl ResourceReport {
    pub fn total_gates(&self) -> u64 {
        self.toffoli + self.cnot + self.x
    }
}

/// Streaming counter: lowers gates on the fly and tallies them, optionally
/// per block label (labels aggregate across repeated begin/end brackets).
pub struct CountSink {
    toffoli: u64,
    cnot: u64,
    x: u64,
    per_block: bool,
    blocks: Vec<(String, BlockCount)>,
    stack: Vec<usize>,
}

impl CountSink {
    pub fn new() -> Self {
        CountSink {
            toffoli: 0,
            cnot: 0,
            x: 0,
            per_block: false,
            blocks: Vec::new(),
            stack: Vec::new(),
        }
    }

    pub fn with_blocks() -> Self {
        let mut c = CountSink::new();
        c.per_block = true;
        c
    }

    fn tally(&mut self, g: Gate) {
        let slot = match (g.kind, g.nctrl) {
            (GateKind::Not, 0) => 0,
            (GateKind::Not, 1) => 1,
            _ => 2,
        };
        match slot {
            0 => self.x += 1,
            1 => self.cnot += 1,
            _ => self.toffoli += 1,
        }
        if let Some(&i) = self.stack.last() {
            let b = &mut self.blocks[i].1;
            match slot {
                0 => b.x += 1,
                1 => b.cnot += 1,
                _ => b.toffoli += 1,
            }
        }
    }

    fn count_lowered(&mut self, g: Gate) -> Result<(), IrError> {
        check_lowered(&g)?;
        self.tally(g);
        Ok(())
    }

    pub fn into_report(self, width: u32) -> ResourceReport {
        ResourceReport {
            width,
            toffoli: self.toffoli,
            cnot: self.cnot,
            x: self.x,
            lowered: true,
            per_block: self.blocks,
        }
    }
}

impl Default for CountSink {
    fn default() -> Self {
        Self::new()
    }
}

impl GateSink for CountSink {
    fn gate(&mut self, g: Gate) {
        lower_gate(g, &mut |lg| self.tally(lg)).expect("synthesis emitted a non-lowerable gate");
    }

    fn begin_block(&mut self, label: &str) {
        if !self.per_block {
            return;
        }
        // Aggregate by base label (strip trailing "@T=..").
        let base = label.split('@').next().unwrap_or(label);
        let i = match self.blocks.iter().position(|(n, _)| n == base) {
            Some(i) => i,
            None => {
                self.blocks.push((base.to_string(), BlockCount::default()));
                self.blocks.len() - 1
            }
        };
        self.stack.push(i);
    }

    fn end_block(&mut self) {
        if self.per_block {
            self.stack.pop();
        }
    }
}

impl GateSink for Circuit {
    fn gate(&mut self, g: Gate) {
        self.push(g);
    }
    fn begin_block(&mut self, label: &str) {
        self.markers
            .push((self.gates.len(), Marker::Begin(label.to_string())));
    }
    fn end_block(&mut self) {
        self.markers.push((self.gates.len(), Marker::End));
    }
}

/// Sink that applies gates directly to a basis state as they are emitted.
pub struct SimSink {
    pub state: BitState,
}

impl SimSink {
    pub fn new(state: BitState) -> Self {
        SimSink { state }
    }
}

impl GateSink for SimSink {
    fn gate(&mut self, g: Gate) {
        g.apply(&mut self.state);
    }
}

/// Sink that buffers gates (for later replay, inversion, or splicing).
#[derive(Default)]
pub struct BufferSink {
    pub gates: Vec<Gate>,
}

impl GateSink for BufferSink {
    fn gate(&mut self, g: Gate) {
        self.gates.push(g);
    }
}
