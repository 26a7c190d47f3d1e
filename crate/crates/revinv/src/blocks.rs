//! Reversible arithmetic building blocks: ripple-carry adders (MAJ/UMA),
//! constant adders and incrementers with zero-bit elision, cyclic shifts,
//! and the location-controlled swap/add-sub/length-update circuits whose
//! operand positions are addressed by the length registers.
//!
//! All emitters stream gates into a [`GateSink`]; nothing here materializes
//! circuits. Wire lists are absolute indices. "LSB first" means index 0 of
//! the slice is the least significant bit.

use crate::ir::{BufferSink, Control, Gate, GateSink};

/// Emit a buffered gate list in reverse (every gate is self-inverse).
pub fn emit_reversed(sink: &mut impl GateSink, gates: &[Gate]) {
    for g in gates.iter().rev() {
        sink.gate(*g);
    }
}

fn write_not(sink: &mut impl GateSink, ctrl: Option<Control>, extra: Option<Control>, t: u32) {
    let mut cs: Vec<Control> = Vec::with_capacity(2);
    if let Some(c) = ctrl {
        cs.push(c);
    }
    if let Some(c) = extra {
        cs.push(c);
    }
    sink.gate(Gate::not_with(&cs, t));
}

/// In-place ripple-carry adder of Cuccaro et al.: `target += addend`
/// (or `-=` in subtract mode), both quantum registers of equal width,
/// carries riding the addend wires, one clean carry anchor `c0`.
///
/// With `capture = Some(z)`, the final carry (borrow for subtraction) is
/// XORed into z: counts (2w Toffoli, 4w+1 CNOT). Subtraction conjugates the
/// target by X, so `z` then receives `target < addend`.
///
/// `ctrl`: every write to `target` (and to z) gains this control; the carry
/// bookkeeping on the addend wires stays uncontrolled and self-cancels.
pub fn cuccaro_adder(
    sink: &mut impl GateSink,
    ctrl: Option<Control>,
    addend: &[u32],
    target: &[u32],
    c0: u32,
    subtract: bool,
    capture: Option<u32>,
) {
    assert_eq!(addend.len(), target.len());
    let w = addend.len();
    assert!(w >= 1);
    for i in 0..w {
        assert_ne!(addend[i], target[i], "operand wire overlap");
    }
    let x = |i: usize| if i == 0 { c0 } else { addend[i - 1] };
    if subtract {
        for &t in target {
            write_not(sink, ctrl, None, t);
        }
    }
    // MAJ sweep.
    for i in 0..w {
        write_not(sink, ctrl, Some(Control::pos(addend[i])), target[i]);
        sink.gate(Gate::cx(addend[i], x(i)));
        sink.gate(Gate::ccx(x(i), target[i], addend[i]));
    }
    if let Some(z) = capture {
        write_not(sink, ctrl, Some(Control::pos(addend[w - 1])), z);
    }
    // UMA sweep.
    for i in (0..w).rev() {
        sink.gate(Gate::ccx(x(i), target[i], addend[i]));
        sink.gate(Gate::cx(addend[i], x(i)));
        write_not(sink, ctrl, Some(Control::pos(x(i))), target[i]);
    }
    if subtract {
        for &t in target {
            write_not(sink, ctrl, None, t);
        }
    }
}

/// Classical-addend ripple adder: `target += constant mod 2^w`, with the
/// zero-bit elision (nothing below the lowest set bit, bare
/// carry Toffolis where the addend bit is 0). `bank` supplies the clean
/// carry slots (one per position at or above the lowest set bit).
///
/// `capture = Some(z)` XORs the carry-out into z. `constant = 1` is the
/// incrementer: (2w-2 Toffoli, w+2 CNOT) including the carry-out CNOT.
#[allow(clippy::needless_range_loop)]
pub fn constant_adder(
    sink: &mut impl GateSink,
    ctrl: Option<Control>,
    target: &[u32],
    constant: u64,
    capture: Option<u32>,
    bank: &[u32],
) {
    let w = target.len();
    assert!(w <= 64, "constant adder width");
    if w < 64 {
        assert!(constant < (1u64 << w), "constant out of range");
    }
    if constant == 0 {
        return;
    }
    let j0 = constant.trailing_zeros() as usize;
    let slots = &bank[..w - j0]; // carry c_{i+1} lives in slots[i - j0]
    let slot = |i: usize| slots[i - j0];
    let kbit = |i: usize| i < 64 && constant >> i & 1 == 1;
    if w == 1 {
        // Degenerate single-bit add of 1.
        if let Some(z) = capture {
            write_not(sink, ctrl, Some(Control::pos(target[0])), z);
        }
        write_not(sink, ctrl, None, target[0]);
        return;
    }
    // Carry sweep: c_{j0+1} = b_{j0}; above, MAJ(k_i, b_i, c_i).
    sink.gate(Gate::cx(target[j0], slot(j0)));
    for i in j0 + 1..w {
        if kbit(i) {
            // c' = b | c = not(!b & !c)
            sink.gate(Gate::not_with(
                &[Control::neg(slot(i - 1)), Control::neg(target[i])],
                slot(i),
            ));
            sink.gate(Gate::x(slot(i)));
        } else {
            sink.gate(Gate::ccx(slot(i - 1), target[i], slot(i)));
        }
    }
    if let Some(z) = capture {
        write_not(sink, ctrl, Some(Control::pos(slot(w - 1))), z);
    }
    // Uncompute carries and write sums, descending.
    for i in (j0 + 1..w).rev() {
        if kbit(i) {
            sink.gate(Gate::x(slot(i)));
            sink.gate(Gate::not_with(
                &[Control::neg(slot(i - 1)), Control::neg(target[i])],
                slot(i),
            ));
        } else {
            sink.gate(Gate::ccx(slot(i - 1), target[i], slot(i)));
        }
        write_not(sink, ctrl, Some(Control::pos(slot(i - 1))), target[i]);
        if kbit(i) {
            write_not(sink, ctrl, None, target[i]);
        }
    }
    sink.gate(Gate::cx(target[j0], slot(j0)));
    write_not(sink, ctrl, None, target[j0]);
}

/// `target -= constant mod 2^w` (structural inverse of `constant_adder`).
pub fn constant_subtractor(
    sink: &mut impl GateSink,
    ctrl: Option<Control>,
    target: &[u32],
    constant: u64,
    capture: Option<u32>,
    bank: &[u32],
) {
    let mut buf = BufferSink::default();
    constant_adder(&mut buf, ctrl, target, constant, capture, bank);
    emit_reversed(sink, &buf.gates);
}

/// Signed constant add: positive adds, negative subtracts, zero is empty.
pub fn constant_add_signed(
    sink: &mut impl GateSink,
    ctrl: Option<Control>,
    target: &[u32],
    amount: i64,
    bank: &[u32],
) {
    match amount.cmp(&0) {
        std::cmp::Ordering::Greater => {
            constant_adder(sink, ctrl, target, amount as u64, None, bank)
        }
        std::cmp::Ordering::Less => {
            constant_subtractor(sink, ctrl, target, (-amount) as u64, None, bank)
        }
        std::cmp::Ordering::Equal => {}
    }
}

/// Incrementer: `(z, b) <- (z xor wrap, b+1 mod 2^w)`.
pub fn incrementer(sink: &mut impl GateSink, target: &[u32], z: u32, bank: &[u32]) {
    constant_adder(sink, None, target, 1, Some(z), bank);
}

/// Decrementer (structural inverse of the incrementer).
pub fn decrementer(sink: &mut impl GateSink, target: &[u32], z: u32, bank: &[u32]) {
    constant_subtractor(sink, None, target, 1, Some(z), bank);
}

/// Carry-only comparison chain: flips `out` iff `value(target) > threshold`,
/// leaving everything else untouched. Implemented as the carry chain of
/// target + (2^w - 1 - threshold), whose carry-out is the predicate.
pub fn compare_gt_const(
    sink: &mut impl GateSink,
    target: &[u32],
    threshold: u64,
    out: u32,
    bank: &[u32],
) {
    let w = target.len();
    assert!(w <= 63 && threshold < (1u64 << w));
    let konst = (1u64 << w) - 1 - threshold;
    let mut buf = BufferSink::default();
    emit_carry_chain(&mut buf, target, konst, bank);
    for g in &buf.gates {
        sink.gate(*g);
    }
    sink.gate(Gate::cx(bank[w - 1], out));
    emit_reversed(sink, &buf.gates);
}

/// Carry chain of target + constant into bank slots c_1..c_w (slot i-1
/// holds c_{i+1}... slot[w-1] holds the carry-out). Helper for comparators.
fn emit_carry_chain(sink: &mut impl GateSink, target: &[u32], constant: u64, bank: &[u32]) {
    let w = target.len();
    let kbit = |i: usize| constant >> i & 1 == 1;
    // c_1 = MAJ(k_0, b_0, 0) = k_0 & b_0
    if kbit(0) {
        sink.gate(Gate::cx(target[0], bank[0]));
    }
    for i in 1..w {
        if kbit(i) {
            sink.gate(Gate::not_with(
                &[Control::neg(bank[i - 1]), Control::neg(target[i])],
                bank[i],
            ));
            sink.gate(Gate::x(bank[i]));
        } else {
            sink.gate(Gate::ccx(bank[i - 1], target[i], bank[i]));
        }
    }
}

/// In-place conditional map `x -> p - x` on an n-bit register, fired by
/// `ctrl`: complement then add (p+1 mod 2^n). Applying it twice under the
/// same control is the identity.
pub fn conditional_const_subtract_from(
    sink: &mut impl GateSink,
    ctrl: Control,
    target: &[u32],
    p: u64,
    bank: &[u32],
) {
    let w = target.len();
    for &t in target {
        sink.gate(Gate::not_with(&[ctrl], t));
    }
    let konst = (p + 1) & ((1u64 << w) - 1);
    constant_adder(sink, Some(ctrl), target, konst, None, bank);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDir {
    /// Toward position 1 (lower indices).
    Left,
    /// Away from position 1.
    Right,
}

/// Cyclic shift of `wires` (listed in position order) by `amount` in
/// `dir`, as a chain of adjacent (controlled) swaps per single shift.
pub fn cyclic_shift(
    sink: &mut impl GateSink,
    ctrl: Option<u32>,
    wires: &[u32],
    dir: ShiftDir,
    amount: u32,
) {
    let n = wires.len();
    if n < 2 {
        return;
    }
    for _ in 0..amount {
        match dir {
            ShiftDir::Left => {
                for i in 0..n - 1 {
                    emit_swap(sink, ctrl, wires[i], wires[i + 1]);
                }
            }
            ShiftDir::Right => {
                for i in (0..n - 1).rev() {
                    emit_swap(sink, ctrl, wires[i], wires[i + 1]);
                }
            }
        }
    }
}

fn emit_swap(sink: &mut impl GateSink, ctrl: Option<u32>, a: u32, b: u32) {
    match ctrl {
        Some(c) => sink.gate(Gate::cswap(c, a, b)),
        None => sink.gate(Gate::swap(a, b)),
    }
}

/// Cyclic rotation by k positions toward position 1, emitted as the cycle
/// decomposition of the permutation (one (controlled) swap per non-fixed
/// point minus cycle count).
pub fn rotate_left_by(sink: &mut impl GateSink, ctrl: Option<u32>, wires: &[u32], k: usize) {
    let n = wires.len();
    if n == 0 {
        return;
    }
    let k = k % n;
    if k == 0 {
        return;
    }
    // new[i] = old[(i + k) mod n]; realize as successive transpositions
    // along each cycle of i -> (i + k) mod n.
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cyc = vec![start];
        seen[start] = true;
        let mut j = (start + k) % n;
        while j != start {
            seen[j] = true;
            cyc.push(j);
            j = (j + k) % n;
        }
        for w in cyc.windows(2) {
            emit_swap(sink, ctrl, wires[w[0]], wires[w[1]]);
        }
    }
}

/// A length register: `width-1` value bits (LSB first) and a top sign bit.
/// Registers store (true value - 1), so sign = 1 exactly when the true
/// value is 0 and excursions stay within range.
#[derive(Debug, Clone)]
pub struct LenReg {
    pub bits: Vec<u32>,
}

impl LenReg {
    pub fn new(bits: Vec<u32>) -> Self {
        assert!(bits.len() >= 2);
        LenReg { bits }
    }
    pub fn width(&self) -> usize {
        self.bits.len()
    }
    pub fn sign(&self) -> u32 {
        *self.bits.last().unwrap()
    }
    pub fn value_bits(&self) -> &[u32] {
        &self.bits[..self.bits.len() - 1]
    }
    /// Low `w` bits (for register-register arithmetic on matching widths).
    pub fn low(&self, w: usize) -> &[u32] {
        &self.bits[..w]
    }

    /// +1 on the full register (value bits with carry into the sign bit).
    pub fn tick_up(&self, sink: &mut impl GateSink, ctrl: Option<Control>, bank: &[u32]) {
        constant_adder(sink, ctrl, self.value_bits(), 1, Some(self.sign()), bank);
    }
    pub fn tick_down(&self, sink: &mut impl GateSink, ctrl: Option<Control>, bank: &[u32]) {
        constant_subtractor(sink, ctrl, self.value_bits(), 1, Some(self.sign()), bank);
    }
    /// Signed constant add over the full register (mod 2^width).
    pub fn add_const(&self, sink: &mut impl GateSink, amount: i64, bank: &[u32]) {
        constant_add_signed(sink, None, &self.bits, amount, bank);
    }
    /// self += other (two's complement over min width), uncontrolled.
    pub fn add_reg(&self, sink: &mut impl GateSink, other: &LenReg, c0: u32, subtract: bool) {
        let w = self.width().min(other.width());
        cuccaro_adder(sink, None, other.low(w), self.low(w), c0, subtract, None);
    }
}

/// Shared scratch layout inside the n-wire scratch register.
///
/// `anc` stays live across a location-controlled sweep and `h` may hold a
/// block-control conjunction for the duration of a block, so both sit
/// outside the carry bank. `f`/`g` are compute-use-uncompute flags that
/// are always clean at walker-tick time, so the bank may overlap them.
#[derive(Debug, Clone)]
pub struct Scratch {
    pub wires: Vec<u32>,
}

impl Scratch {
    pub fn anc(&self) -> u32 {
        self.wires[0]
    }
    pub fn f(&self) -> u32 {
        self.wires[1]
    }
    pub fn g(&self) -> u32 {
        self.wires[2]
    }
    /// Long-lived flag slot, never part of the bank.
    pub fn h(&self) -> u32 {
        *self.wires.last().unwrap()
    }
    /// Carry bank for ticks and constant adders; overlaps f/g by design.
    pub fn bank(&self) -> &[u32] {
        &self.wires[1..self.wires.len() - 1]
    }
    /// Length-update allocation: two latches and a flag that survive ticks.
    pub fn latch_slots(&self, tick_bank_width: usize) -> (u32, u32, u32, &[u32]) {
        let bank = &self.wires[1..1 + tick_bank_width];
        let la = self.wires[0];
        let lb = self.wires[1 + tick_bank_width];
        let g = self.wires[2 + tick_bank_width];
        (la, lb, g, bank)
    }
}

/// Location-controlled swap: exchanges `sign_wire` with the
/// work register position j = lt + lq + 1, for any j in [k, K], using the
/// lq register as a walker (setup "+lt, -(K-3)", K-k-1 ticks, teardown
/// "+(k-2), -lt"). Walker arithmetic is uncontrolled; the swaps themselves
/// are gated by `ctrl` AND the walker sign, folded into one flag wire.
#[allow(clippy::too_many_arguments)]
pub fn loc_swap(
    sink: &mut impl GateSink,
    ctrl: u32,
    k: u32,
    kk: u32,
    upos: &impl Fn(u32) -> u32,
    lq: &LenReg,
    lt: &LenReg,
    sign_wire: u32,
    scratch: &Scratch,
) {
    assert!(k <= kk && k >= 1);
    let g = scratch.g();
    let bank = scratch.bank();
    // Setup: stored_lq += stored_lt + (3 - K)  =>  walker = j - K.
    lq.add_reg(sink, lt, scratch.anc(), false);
    lq.add_const(sink, 3 - kk as i64, bank);
    let s = lq.sign();
    let gated_swap = |sink: &mut dyn GateSink, polarity: bool, pos: u32| {
        sink.gate(Gate::not_with(
            &[
                Control::pos(ctrl),
                Control {
                    wire: s,
                    positive: polarity,
                },
            ],
            g,
        ));
        sink.gate(Gate::cswap(g, sign_wire, upos(pos)));
        sink.gate(Gate::not_with(
            &[
                Control::pos(ctrl),
                Control {
                    wire: s,
                    positive: polarity,
                },
            ],
            g,
        ));
    };
    // j = K fires on non-negative walker.
    gated_swap(sink, false, kk);
    for m in (k + 1..kk).rev() {
        gated_swap(sink, true, m); // fires when j <= m
        lq.tick_up(sink, None, bank);
        gated_swap(sink, true, m); // fires when j <= m-1; pair nets j = m
    }
    if kk > k {
        gated_swap(sink, true, k); // walker = j-(k+1): fires iff j = k
    }
    // Teardown: undo the K-k-1 ticks and the setup constant, then -lt.
    let ticks = if kk > k { (kk - k - 1) as i64 } else { 0 };
    lq.add_const(sink, kk as i64 - 3 - ticks, bank);
    lq.add_reg(sink, lt, scratch.anc(), true);
}

/// Which side of a windowed adder is the in-place target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Work1,
    Work2,
}

/// Boundary walker for [`LocAddSub`]: a length register whose sign bit
/// tracks a window endpoint as the scan moves. The caller is responsible
/// for the setup/teardown arithmetic that aligns the register before and
/// after the block; the block itself only ticks it (one tick per position
/// on the outbound sweep, mirrored on the return sweep).
pub struct Walker<'a> {
    pub reg: &'a LenReg,
    /// Tick applied after each outbound position (+1 or -1).
    pub tick_out: i64,
}

/// Location-controlled windowed add/subtract between aligned spans of the
/// two work registers.
///
/// Scans classical positions over the envelope `[k, K]` starting at the
/// least-significant end, with Cuccaro carries riding the partner
/// (non-target) wires. A per-position flag F = (inside the dynamic window)
/// AND ctrl gates every addend read and target write. A clean seed parked
/// in `scratch.anc` is swapped into the carry chain at the quantum window
/// boundary by a walker-sign-paired controlled swap (only needed when the
/// LSB boundary is quantum); the borrow/carry is captured into `capture`
/// by a walker-sign-paired pair of Toffolis at the MSB boundary transition.
///
/// Walker setup/teardown arithmetic is the caller's job; the block only
/// ticks the walkers, one outbound tick per position, mirrored back.
pub struct LocAddSub<'a> {
    pub ctrl: u32,
    pub k: u32,
    pub kk: u32,
    /// Work1 wire for position p.
    pub w1: &'a dyn Fn(u32) -> u32,
    pub w2: &'a dyn Fn(u32) -> u32,
    pub target: Target,
    pub subtract: bool,
    pub capture: Option<u32>,
    /// LSB boundary walker (ℓ_s based); None anchors the chain at the fixed
    /// envelope end (the one-sided t-variants).
    pub lsb_walker: Option<Walker<'a>>,
    /// MSB boundary walker: masks target writes and locates the capture.
    pub msb_walker: Walker<'a>,
    /// Separate addend-extent walker when the addend span is narrower than
    /// the target span (the phase-4 t-variant); otherwise the msb walker
    /// masks addend reads too.
    pub addend_walker: Option<Walker<'a>>,
    /// True when positions scan K -> k (r-ops; significance ascends as the
    /// position index descends). False scans k -> K (t-ops).
    pub descending: bool,
    pub scratch: &'a Scratch,
}

impl<'a> LocAddSub<'a> {
    fn positions(&self) -> Vec<u32> {
        if self.descending {
            (self.k..=self.kk).rev().collect()
        } else {
            (self.k..=self.kk).collect()
        }
    }

    fn target_wire(&self, pos: u32) -> u32 {
        match self.target {
            Target::Work1 => (self.w1)(pos),
            Target::Work2 => (self.w2)(pos),
        }
    }
    fn partner_wire(&self, pos: u32) -> u32 {
        match self.target {
            Target::Work1 => (self.w2)(pos),
            Target::Work2 => (self.w1)(pos),
        }
    }

    /// Carry-in wire for the scan position at index `idx` in the scan order.
    fn chain_in(&self, positions: &[u32], idx: usize) -> u32 {
        if idx == 0 {
            self.scratch.anc()
        } else {
            self.partner_wire(positions[idx - 1])
        }
    }

    /// In-window condition on the target side, as a control on walker signs.
    /// Two-sided (r-ops): both signs set. One-sided (t-ops): msb sign clear.
    fn target_flag(&self, sink: &mut impl GateSink, set: bool) {
        let f = self.scratch.f();
        let g = self.scratch.g();
        match &self.lsb_walker {
            Some(wb) => {
                let lsb_ok = Control::pos(wb.reg.sign());
                let msb_ok = Control::pos(self.msb_walker.reg.sign());
                if set {
                    sink.gate(Gate::not_with(&[lsb_ok, msb_ok], g));
                    sink.gate(Gate::ccx(g, self.ctrl, f));
                } else {
                    sink.gate(Gate::ccx(g, self.ctrl, f));
                    sink.gate(Gate::not_with(&[lsb_ok, msb_ok], g));
                }
            }
            None => {
                let inside = Control::neg(self.msb_walker.reg.sign());
                sink.gate(Gate::not_with(&[inside, Control::pos(self.ctrl)], f));
            }
        }
    }

    /// Flag for addend reads: same wire as the target flag unless a
    /// dedicated addend walker narrows it (computed into scratch h').
    fn addend_flag(&self, sink: &mut impl GateSink, fa: u32) {
        if let Some(wa) = &self.addend_walker {
            let inside = Control::neg(wa.reg.sign());
            sink.gate(Gate::not_with(&[inside, Control::pos(self.ctrl)], fa));
        }
    }

    fn capture_cond(&self) -> Control {
        match &self.lsb_walker {
            Some(_) => Control::pos(self.msb_walker.reg.sign()),
            None => Control::neg(self.msb_walker.reg.sign()),
        }
    }

    fn tick(&self, sink: &mut impl GateSink, w: &Walker, out: bool, bank: &[u32]) {
        let up = (w.tick_out > 0) == out;
        if up {
            w.reg.tick_up(sink, None, bank);
        } else {
            w.reg.tick_down(sink, None, bank);
        }
    }

    pub fn emit(&self, sink: &mut impl GateSink) {
        let positions = self.positions();
        let anc = self.scratch.anc();
        let f = self.scratch.f();
        let h = self.scratch.h();
        let bank = self.scratch.bank();
        // Addend flag shares f unless a dedicated walker exists.
        let fa = if self.addend_walker.is_some() {
            self.scratch.g()
        } else {
            f
        };

        // MAJ sweep.
        for (idx, &pos) in positions.iter().enumerate() {
            let t = self.target_wire(pos);
            let a = self.partner_wire(pos);
            let x = self.chain_in(&positions, idx);
            self.target_flag(sink, true);
            self.addend_flag(sink, fa);
            if self.subtract {
                sink.gate(Gate::cx(f, t));
            }
            sink.gate(Gate::ccx(a, fa, t));
            sink.gate(Gate::ccx(a, fa, x));
            sink.gate(Gate::ccx(x, t, a));
            self.addend_flag(sink, fa);
            self.target_flag(sink, false);
            // Seed injection around the LSB-walker tick.
            if let Some(wb) = &self.lsb_walker {
                let sb = Control::pos(wb.reg.sign());
                sink.gate(Gate::swap_with(&[sb], anc, a));
                self.tick(sink, wb, true, bank);
                sink.gate(Gate::swap_with(&[sb], anc, a));
            }
            if let Some(wa) = &self.addend_walker {
                self.tick(sink, wa, true, bank);
            }
            // Borrow/carry capture around the MSB-walker tick. With a
            // quantum LSB boundary the pair is additionally gated on the
            // LSB-walker sign, which at this point in the schedule reads
            // "the dynamic window reaches this transition" - it blocks the
            // capture when the window is empty (the carry wire then holds
            // unwound ride garbage rather than a borrow).
            let g = self.scratch.g();
            let cap_pair = |sink: &mut dyn GateSink, this: &Self| {
                if let Some(z) = this.capture {
                    let cond = this.capture_cond();
                    match &this.lsb_walker {
                        Some(wb) => {
                            let reach = Control::pos(wb.reg.sign());
                            sink.gate(Gate::not_with(&[cond, reach], g));
                            sink.gate(Gate::ccx(g, this.ctrl, h));
                            sink.gate(Gate::ccx(a, h, z));
                            sink.gate(Gate::ccx(g, this.ctrl, h));
                            sink.gate(Gate::not_with(&[cond, reach], g));
                        }
                        None => {
                            sink.gate(Gate::not_with(&[cond, Control::pos(this.ctrl)], h));
                            sink.gate(Gate::ccx(a, h, z));
                            sink.gate(Gate::not_with(&[cond, Control::pos(this.ctrl)], h));
                        }
                    }
                }
            };
            cap_pair(sink, self);
            self.tick(sink, &self.msb_walker, true, bank);
            cap_pair(sink, self);
        }

        // UMA sweep (reverse scan order).
        for (idx, &pos) in positions.iter().enumerate().rev() {
            let t = self.target_wire(pos);
            let a = self.partner_wire(pos);
            let x = self.chain_in(&positions, idx);
            self.tick(sink, &self.msb_walker, false, bank);
            if let Some(wa) = &self.addend_walker {
                self.tick(sink, wa, false, bank);
            }
            if let Some(wb) = &self.lsb_walker {
                let sb = Control::pos(wb.reg.sign());
                sink.gate(Gate::swap_with(&[sb], anc, a));
                self.tick(sink, wb, false, bank);
                sink.gate(Gate::swap_with(&[sb], anc, a));
            }
            self.target_flag(sink, true);
            self.addend_flag(sink, fa);
            sink.gate(Gate::ccx(x, t, a));
            sink.gate(Gate::ccx(a, fa, x));
            sink.gate(Gate::ccx(x, f, t));
            if self.subtract {
                sink.gate(Gate::cx(f, t));
            }
            self.addend_flag(sink, fa);
            self.target_flag(sink, false);
        }
    }
}

/// Scan-and-latch length update. Classical scan over
/// positions [k, K] (descending when `descending`); for each position the
/// latch toggles once at the first set bit seen (guarded by its own count
/// register's virgin sign and by the guard walker excluding the partner
/// field), and the count register ticks while the latch is set. Afterwards
/// the difference of the two counts is added into `dest` under `ctrl`, and
/// the mirrored scan uncomputes every latch, count and walker.
#[allow(clippy::too_many_arguments)]
pub fn length_update(
    sink: &mut impl GateSink,
    ctrl: u32,
    k: u32,
    kk: u32,
    descending: bool,
    upos: &dyn Fn(u32) -> u32,
    vpos: &dyn Fn(u32) -> u32,
    count_u: &LenReg,
    count_v: &LenReg,
    guard: &LenReg,
    guard_setup: i64,
    dest: &LenReg,
    scratch: &Scratch,
) {
    let tick_w = count_u.width().max(count_v.width()) - 1;
    let (latch_u, latch_v, g, bank) = scratch.latch_slots(tick_w);
    let positions: Vec<u32> = if descending {
        (k..=kk).rev().collect()
    } else {
        (k..=kk).collect()
    };

    let mut scan = BufferSink::default();
    {
        let sink = &mut scan;
        guard.add_const(sink, guard_setup, bank);
        for &pos in &positions {
            // u side: latch on first set bit inside the guard region.
            sink.gate(Gate::ccx(guard.sign(), count_u.sign(), g));
            sink.gate(Gate::ccx(upos(pos), g, latch_u));
            sink.gate(Gate::ccx(guard.sign(), count_u.sign(), g));
            count_u.tick_up(sink, Some(Control::pos(latch_u)), bank);
            // v side.
            sink.gate(Gate::ccx(guard.sign(), count_v.sign(), g));
            sink.gate(Gate::ccx(vpos(pos), g, latch_v));
            sink.gate(Gate::ccx(guard.sign(), count_v.sign(), g));
            count_v.tick_up(sink, Some(Control::pos(latch_v)), bank);
            guard.tick_down(sink, None, bank);
        }
    }
    for gate in &scan.gates {
        sink.gate(*gate);
    }
    // Delta: dest += (count_u - count_v), two's complement on dest's width.
    let w = dest.width().min(count_u.width()).min(count_v.width());
    cuccaro_adder(sink, None, count_v.low(w), count_u.low(w), g, true, None);
    cuccaro_adder(
        sink,
        Some(Control::pos(ctrl)),
        count_u.low(w),
        &dest.bits,
        g,
        false,
        None,
    );
    cuccaro_adder(sink, None, count_v.low(w), count_u.low(w), g, false, None);
    // Mirror uncompute.
    emit_reversed(sink, &scan.gates);
}

/// Copy the aligned t' value out of Work2 into a clean output register:
/// barrel-rotate Work2 back by ls (keyed on the stored length bits, sign
/// bit carrying its negative weight), fan out the little-endian low n
/// positions, and rotate forward again. On reachable terminal states t'
/// fits in n bits and the pad positions are zero, so the plain fan-out
/// equals the gated scan.
pub fn loc_copy(sink: &mut impl GateSink, work2: &[u32], ls: &LenReg, output: &[u32]) {
    let nn = work2.len();
    let n = output.len();
    assert!(n + 3 == nn);
    let mod_pow2 = |j: usize| -> usize {
        let mut v = 1usize;
        for _ in 0..j {
            v = v * 2 % nn;
        }
        v
    };
    // Un-rotate by ls = stored + 1 (two's complement read of the register).
    rotate_left_by(sink, None, work2, nn - 1);
    for (j, &bit) in ls.value_bits().iter().enumerate() {
        let amount = mod_pow2(j);
        rotate_left_by(sink, Some(bit), work2, (nn - amount) % nn);
    }
    let sign_amount = mod_pow2(ls.value_bits().len());
    rotate_left_by(sink, Some(ls.sign()), work2, sign_amount);
    for (i, &out) in output.iter().enumerate() {
        sink.gate(Gate::cx(work2[i], out));
    }
    // Rotate forward again.
    rotate_left_by(sink, Some(ls.sign()), work2, (nn - sign_amount) % nn);
    for (j, &bit) in ls.value_bits().iter().enumerate().rev() {
        let amount = mod_pow2(j);
        rotate_left_by(sink, Some(bit), work2, amount);
    }
    rotate_left_by(sink, None, work2, 1);
}

/// One-shot bit-length scan: adds bitlen of the big-endian field
/// positions [k, K] (scanned from the MSB end downward in significance,
/// i.e. ascending position index) into `dest`, assuming dest starts at
/// stored -1 (sign set) and the field is nonzero. Used for the ℓ_r'
/// initialization; mirrored by the epilogue.
pub fn bitlen_scan(
    sink: &mut impl GateSink,
    k: u32,
    kk: u32,
    pos_wire: &dyn Fn(u32) -> u32,
    dest: &LenReg,
    scratch: &Scratch,
) {
    let tick_w = dest.width() - 1;
    let (latch, _lb, _g, bank) = scratch.latch_slots(tick_w);
    for pos in k..=kk {
        sink.gate(Gate::ccx(pos_wire(pos), dest.sign(), latch));
        dest.tick_up(sink, Some(Control::pos(latch)), bank);
    }
    // The field is nonzero on every valid input, so the latch always set.
    sink.gate(Gate::x(latch));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BitState, Circuit};

    fn run(c: &Circuit, bits: &BitState) -> BitState {
        c.lower().unwrap().apply(bits).unwrap()
    }

    fn le_read(s: &BitState, wires: &[u32]) -> u64 {
        wires
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &w)| acc | ((s.get(w) as u64) << i))
    }

    fn le_write(s: &mut BitState, wires: &[u32], v: u64) {
        for (i, &w) in wires.iter().enumerate() {
            s.set(w, v >> i & 1 == 1);
        }
    }

    #[test]
    fn cuccaro_adder_counts_and_function() {
        // Acceptance-pinned counts: 2w Toffoli, 4w+1 CNOT (with capture).
        for w in [1u32, 4, 5, 16] {
            let width = 2 * w + 2;
            let addend: Vec<u32> = (0..w).collect();
            let target: Vec<u32> = (w..2 * w).collect();
            let c0 = 2 * w;
            let z = 2 * w + 1;
            let mut c = Circuit::new(width);
            cuccaro_adder(&mut c, None, &addend, &target, c0, false, Some(z));
            let r = c.lower().unwrap().count().unwrap();
            assert_eq!(
                (r.toffoli, r.cnot),
                ((2 * w) as u64, (4 * w + 1) as u64),
                "w={w}"
            );
        }
        // Functional: all 4-bit pairs.
        let w = 4u32;
        let addend: Vec<u32> = (0..w).collect();
        let target: Vec<u32> = (w..2 * w).collect();
        let mut c = Circuit::new(2 * w + 2);
        cuccaro_adder(
            &mut c,
            None,
            &addend,
            &target,
            2 * w,
            false,
            Some(2 * w + 1),
        );
        let low = c.lower().unwrap();
        for a in 0..16u64 {
            for b in 0..16u64 {
                let mut s = BitState::zeros((2 * w + 2) as usize);
                le_write(&mut s, &addend, a);
                le_write(&mut s, &target, b);
                let out = low.apply(&s).unwrap();
                assert_eq!(le_read(&out, &target), (a + b) % 16, "{a}+{b}");
                assert_eq!(le_read(&out, &addend), a);
                assert!(!out.get(2 * w), "carry anchor restored");
                assert_eq!(out.get(2 * w + 1), a + b >= 16, "carry out");
            }
        }
    }

    #[test]
    fn cuccaro_subtract_borrow_and_restore() {
        let w = 4u32;
        let addend: Vec<u32> = (0..w).collect();
        let target: Vec<u32> = (w..2 * w).collect();
        let mut sub = Circuit::new(2 * w + 2);
        cuccaro_adder(
            &mut sub,
            None,
            &addend,
            &target,
            2 * w,
            true,
            Some(2 * w + 1),
        );
        let sub = sub.lower().unwrap();
        let mut add = Circuit::new(2 * w + 2);
        cuccaro_adder(&mut add, None, &addend, &target, 2 * w, false, None);
        let add = add.lower().unwrap();
        for a in 0..16u64 {
            for b in 0..16u64 {
                let mut s = BitState::zeros((2 * w + 2) as usize);
                le_write(&mut s, &addend, a);
                le_write(&mut s, &target, b);
                let out = sub.apply(&s).unwrap();
                assert_eq!(le_read(&out, &target), b.wrapping_sub(a) & 15, "{b}-{a}");
                assert_eq!(out.get(2 * w + 1), b < a, "borrow {b}-{a}");
                // Re-adding restores the two's-complement residue.
                let back = add.apply(&out).unwrap();
                assert_eq!(le_read(&back, &target), b);
            }
        }
    }

    #[test]
    fn controlled_adder_is_gated() {
        let w = 3u32;
        let addend: Vec<u32> = (0..w).collect();
        let target: Vec<u32> = (w..2 * w).collect();
        let ctl = 2 * w + 2;
        let mut c = Circuit::new(2 * w + 3);
        cuccaro_adder(
            &mut c,
            Some(Control::pos(ctl)),
            &addend,
            &target,
            2 * w,
            false,
            Some(2 * w + 1),
        );
        let low = c.lower().unwrap();
        for on in [false, true] {
            for a in 0..8u64 {
                for b in 0..8u64 {
                    let mut s = BitState::zeros((2 * w + 3) as usize);
                    le_write(&mut s, &addend, a);
                    le_write(&mut s, &target, b);
                    s.set(ctl, on);
                    let out = low.apply(&s).unwrap();
                    let expect = if on { (a + b) % 8 } else { b };
                    assert_eq!(le_read(&out, &target), expect);
                    assert_eq!(le_read(&out, &addend), a);
                    assert!(!out.get(2 * w));
                }
            }
        }
    }

    #[test]
    fn incrementer_counts_exact() {
        // Acceptance-pinned: 2w-2 Toffoli, w+2 CNOT for w in [2, 64].
        for w in 2..=64u32 {
            let target: Vec<u32> = (0..w).collect();
            let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
            let mut c = Circuit::new(2 * w + 1);
            incrementer(&mut c, &target, w, &bank);
            let r = c.lower().unwrap().count().unwrap();
            assert_eq!(
                (r.toffoli, r.cnot),
                ((2 * w - 2) as u64, (w + 2) as u64),
                "w={w}"
            );
        }
    }

    #[test]
    fn incrementer_and_decrementer_function() {
        let w = 6u32;
        let target: Vec<u32> = (0..w).collect();
        let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
        let mut inc = Circuit::new(2 * w + 1);
        incrementer(&mut inc, &target, w, &bank);
        let inc = inc.lower().unwrap();
        let mut dec = Circuit::new(2 * w + 1);
        decrementer(&mut dec, &target, w, &bank);
        let dec = dec.lower().unwrap();
        for v in 0..64u64 {
            let mut s = BitState::zeros((2 * w + 1) as usize);
            le_write(&mut s, &target, v);
            let out = inc.apply(&s).unwrap();
            assert_eq!(le_read(&out, &target), (v + 1) % 64, "v={v}");
            assert_eq!(out.get(w), v == 63, "wrap bit v={v}");
            assert!(bank.iter().all(|&b| !out.get(b)), "bank clean");
            let back = dec.apply(&out).unwrap();
            assert_eq!(le_read(&back, &target), v);
        }
        // width-3 wraparound: 0b111 -> 0b000.
        let w3: Vec<u32> = (0..3).collect();
        let bank3: Vec<u32> = (4..8).collect();
        let mut c3 = Circuit::new(8);
        incrementer(&mut c3, &w3, 3, &bank3);
        let mut s = BitState::zeros(8);
        le_write(&mut s, &w3, 7);
        let out = c3.lower().unwrap().apply(&s).unwrap();
        assert_eq!(le_read(&out, &w3), 0);
        assert!(out.get(3));
    }

    #[test]
    fn constant_adder_all_widths_and_constants() {
        for w in 1..=5u32 {
            for konst in 0..(1u64 << w) {
                let target: Vec<u32> = (0..w).collect();
                let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
                let mut c = Circuit::new(2 * w + 1);
                constant_adder(&mut c, None, &target, konst, Some(w), &bank);
                if konst == 0 {
                    assert!(c.gates.is_empty(), "constant 0 is the empty circuit");
                    continue;
                }
                let low = c.lower().unwrap();
                for v in 0..(1u64 << w) {
                    let mut s = BitState::zeros((2 * w + 1) as usize);
                    le_write(&mut s, &target, v);
                    let out = low.apply(&s).unwrap();
                    assert_eq!(
                        le_read(&out, &target),
                        (v + konst) & ((1 << w) - 1),
                        "w={w} k={konst} v={v}"
                    );
                    assert_eq!(out.get(w), v + konst >= 1 << w);
                    assert!(bank.iter().all(|&b| !out.get(b)));
                }
            }
        }
    }

    #[test]
    fn constant_one_reduces_to_incrementer_counts() {
        for w in 2..=8u32 {
            let target: Vec<u32> = (0..w).collect();
            let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
            let mut c = Circuit::new(2 * w + 1);
            constant_adder(&mut c, None, &target, 1, Some(w), &bank);
            let r = c.lower().unwrap().count().unwrap();
            assert_eq!((r.toffoli, r.cnot), ((2 * w - 2) as u64, (w + 2) as u64));
        }
    }

    #[test]
    fn compare_gt_const_exhaustive() {
        let w = 5u32;
        let target: Vec<u32> = (0..w).collect();
        let out = w;
        let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
        for threshold in [0u64, 3, 15, 18, 30, 31] {
            let mut c = Circuit::new(2 * w + 1);
            compare_gt_const(&mut c, &target, threshold, out, &bank);
            let low = c.lower().unwrap();
            for v in 0..32u64 {
                let mut s = BitState::zeros((2 * w + 1) as usize);
                le_write(&mut s, &target, v);
                let o = low.apply(&s).unwrap();
                assert_eq!(o.get(out), v > threshold, "v={v} thr={threshold}");
                assert_eq!(le_read(&o, &target), v);
                assert!(bank.iter().all(|&b| !o.get(b)));
            }
        }
    }

    #[test]
    fn conditional_p_minus_x_is_involution() {
        let p = 37u64;
        let w = 6u32;
        let target: Vec<u32> = (0..w).collect();
        let ctl = w;
        let bank: Vec<u32> = (w + 1..2 * w + 1).collect();
        let mut c = Circuit::new(2 * w + 1);
        conditional_const_subtract_from(&mut c, Control::pos(ctl), &target, p, &bank);
        let low = c.lower().unwrap();
        for x in 1..p {
            let mut s = BitState::zeros((2 * w + 1) as usize);
            le_write(&mut s, &target, x);
            s.set(ctl, true);
            let out = low.apply(&s).unwrap();
            assert_eq!(le_read(&out, &target), p - x, "x={x}");
            let back = low.apply(&out).unwrap();
            assert_eq!(le_read(&back, &target), x);
            // Control off: identity.
            s.set(ctl, false);
            assert_eq!(low.apply(&s).unwrap(), s);
        }
    }

    #[test]
    fn cyclic_shift_matches_rotation() {
        let n = 9usize;
        let wires: Vec<u32> = (0..n as u32).collect();
        let mut left = Circuit::new(n as u32);
        cyclic_shift(&mut left, None, &wires, ShiftDir::Left, 1);
        // Spec count: n-1 swaps = (n-1) CCX-free... lowered: 3 CNOT each.
        assert_eq!(left.gates.len(), n - 1);
        let mut s = BitState::zeros(n);
        s.set(4, true);
        s.set(8, true);
        let out = left.apply(&s).unwrap();
        assert!(out.get(3) && out.get(7));
        // Left then right is the identity.
        let mut right = Circuit::new(n as u32);
        cyclic_shift(&mut right, None, &wires, ShiftDir::Right, 1);
        assert_eq!(right.apply(&out).unwrap(), s);
        // Wraparound.
        let mut s2 = BitState::zeros(n);
        s2.set(0, true);
        let out2 = left.apply(&s2).unwrap();
        assert!(out2.get(n as u32 - 1));
    }

    #[test]
    fn controlled_shift_gate_count() {
        // Single controlled shift on n+3 wires: (n+2) CCX + 2(n+2) CNOT.
        let n = 6u32;
        let wires: Vec<u32> = (0..n + 3).collect();
        let mut c = Circuit::new(n + 4);
        cyclic_shift(&mut c, Some(n + 3), &wires, ShiftDir::Left, 1);
        let r = c.lower().unwrap().count().unwrap();
        assert_eq!((r.toffoli, r.cnot), ((n + 2) as u64, (2 * (n + 2)) as u64));
    }

    #[test]
    fn rotate_left_by_matches_model_rotation() {
        for n in [5usize, 9, 12] {
            let wires: Vec<u32> = (0..n as u32).collect();
            for k in 0..n {
                let mut c = Circuit::new(n as u32);
                rotate_left_by(&mut c, None, &wires, k);
                let low = c.lower().unwrap();
                for pat in [0b10110u64, 0b01001, 1, (1 << n) - 1] {
                    let mut s = BitState::zeros(n);
                    for i in 0..n {
                        s.set(i as u32, pat >> i & 1 == 1);
                    }
                    let out = low.apply(&s).unwrap();
                    for i in 0..n {
                        assert_eq!(
                            out.get(i as u32),
                            s.get(((i + k) % n) as u32),
                            "n={n} k={k} i={i}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn loc_swap_exhaustive_small_layout() {
        // Layout: 8 work positions (wires 0..8), lq register 4 wires (8..12),
        // lt register 4 wires (12..16), sign 16, ctrl 17, scratch 18..24.
        let width = 25u32;
        let upos = |p: u32| p - 1;
        let lq = LenReg::new((8..12).collect());
        let lt = LenReg::new((12..16).collect());
        let sign = 16u32;
        let ctrl = 17u32;
        let scratch = Scratch {
            wires: (18..25).collect(),
        };
        let (k, kk) = (2u32, 7u32);
        let mut c = Circuit::new(width);
        loc_swap(&mut c, ctrl, k, kk, &upos, &lq, &lt, sign, &scratch);
        let low = c.lower().unwrap();
        for lt_v in 1u64..=4 {
            for lq_v in 0u64..=4 {
                let j = lt_v + lq_v + 1;
                if j < k as u64 || j > kk as u64 {
                    continue;
                }
                for sign_v in [false, true] {
                    for on in [false, true] {
                        for pat in [0u64, 0b10101010, 0b01011100, 0xff] {
                            let mut s = BitState::zeros(width as usize);
                            for i in 0..8 {
                                s.set(i, pat >> i & 1 == 1);
                            }
                            le_write(&mut s, &lq.bits, (lq_v.wrapping_sub(1)) & 15);
                            le_write(&mut s, &lt.bits, lt_v - 1);
                            s.set(sign, sign_v);
                            s.set(ctrl, on);
                            let out = low.apply(&s).unwrap();
                            let mut expect = s.clone();
                            if on {
                                let wire = upos(j as u32);
                                let b = expect.get(wire);
                                expect.set(wire, sign_v);
                                expect.set(sign, b);
                            }
                            assert_eq!(
                                out, expect,
                                "lt={lt_v} lq={lq_v} sign={sign_v} on={on} pat={pat:#x}"
                            );
                        }
                    }
                }
            }
        }
    }
}
