//! Assembly of the per-step circuit and the full modular-inversion circuit:
//! qubit layout, step-dependent active windows, block scheduling and the
//! forward/copy/backward structure of the complete run.

use crate::blocks::{
    self, bitlen_scan, compare_gt_const, conditional_const_subtract_from, cyclic_shift,
    length_update, loc_swap, LenReg, LocAddSub, Scratch, ShiftDir, Target, Walker,
};
use crate::exact;
use crate::ir::{BitState, BufferSink, Circuit, Control, Gate, GateSink};
use crate::model::{self, bitlen, MachineState, ProblemInstance};
use serde::Serialize;

/// Deterministic wire assignment for an n-bit instance.
///
/// The inversion-only portion (everything except the output register) is
/// exactly 3n + 4*floor(log2 n) + 20 wires for n >= 7: the x input lives in
/// Work2's low n positions (the machine starts with Work2 = |000, x>), and
/// the n-wire scratch register supplies the carry banks, the chain anchor
/// and the latch/flag ancillas the blocks need. For n in 3..=6 the scratch
/// register must still hold floor(log2 n)+5 wires, which exceeds n, so the
/// total runs slightly over the formula at those sizes.
#[derive(Debug, Clone, Serialize)]
pub struct QubitLayout {
    pub n: u32,
    /// x input, LSB first; aliases Work2 positions n+3 down to 4.
    pub input: Vec<u32>,
    /// Work2 pad wires (positions 1..3).
    pub work2_pad: Vec<u32>,
    /// Work1 wires in position order (index 0 = position 1).
    pub work1: Vec<u32>,
    /// Scratch register (chain anchor, flags, latches, carry banks).
    pub scratch: Vec<u32>,
    pub lt: Vec<u32>,
    pub lq: Vec<u32>,
    pub lrp: Vec<u32>,
    pub ls: Vec<u32>,
    pub phase1: u32,
    pub phase2: u32,
    pub sign: u32,
    pub iter: u32,
    pub ctrl: u32,
    /// Result register, LSB first (present in the full inversion circuit).
    pub output: Vec<u32>,
}

impl QubitLayout {
    pub fn new(n: u32) -> QubitLayout {
        assert!(n >= 3, "need n >= 3");
        let l = n.ilog2();
        let scratch_w = n.max(l + 5);
        let mut next = 0u32;
        let mut take = |k: u32| {
            let v: Vec<u32> = (next..next + k).collect();
            next += k;
            v
        };
        let input = take(n);
        let work2_pad = take(3);
        let work1 = take(n + 3);
        let scratch = take(scratch_w);
        let lt = take(l + 2);
        let lq = take(l + 2);
        let lrp = take(l + 2);
        let ls = take(l + 3);
        let flags = take(5);
        let output = take(n);
        QubitLayout {
            n,
            input,
            work2_pad,
            work1,
            scratch,
            lt,
            lq,
            lrp,
            ls,
            phase1: flags[0],
            phase2: flags[1],
            sign: flags[2],
            iter: flags[3],
            ctrl: flags[4],
            output,
        }
    }

    /// Width of the inversion machinery (excluding the output register).
    pub fn inversion_width(&self) -> u32 {
        self.output[0]
    }

    /// Total circuit width including the output register.
    pub fn total_width(&self) -> u32 {
        self.output[0] + self.n
    }

    /// Work1 wire for 1-based position.
    pub fn w1(&self, pos: u32) -> u32 {
        self.work1[pos as usize - 1]
    }

    /// Work2 wire for 1-based position: positions 1..3 are pad wires,
    /// positions 4..n+3 alias the input register big-endian.
    pub fn w2(&self, pos: u32) -> u32 {
        if pos <= 3 {
            self.work2_pad[pos as usize - 1]
        } else {
            self.input[(self.n + 3 - pos) as usize]
        }
    }

    pub fn work2_wires(&self) -> Vec<u32> {
        (1..=self.n + 3).map(|p| self.w2(p)).collect()
    }

    /// x-field wires (Work2 positions 4..n+3) LSB first.
    pub fn x_field(&self) -> Vec<u32> {
        self.input.clone()
    }

    pub fn lt_reg(&self) -> LenReg {
        LenReg::new(self.lt.clone())
    }
    pub fn lq_reg(&self) -> LenReg {
        LenReg::new(self.lq.clone())
    }
    pub fn lrp_reg(&self) -> LenReg {
        LenReg::new(self.lrp.clone())
    }
    pub fn ls_reg(&self) -> LenReg {
        LenReg::new(self.ls.clone())
    }
    pub fn scratch(&self) -> Scratch {
        Scratch {
            wires: self.scratch.clone(),
        }
    }

    pub fn regions(&self) -> Vec<(String, Vec<u32>)> {
        vec![
            ("input".into(), self.input.clone()),
            ("work2_pad".into(), self.work2_pad.clone()),
            ("work1".into(), self.work1.clone()),
            ("scratch".into(), self.scratch.clone()),
            ("lt".into(), self.lt.clone()),
            ("lq".into(), self.lq.clone()),
            ("lrp".into(), self.lrp.clone()),
            ("ls".into(), self.ls.clone()),
            ("phase1".into(), vec![self.phase1]),
            ("phase2".into(), vec![self.phase2]),
            ("sign".into(), vec![self.sign]),
            ("iter".into(), vec![self.iter]),
            ("ctrl".into(), vec![self.ctrl]),
            ("output".into(), self.output.clone()),
        ]
    }
}

/// Step-dependent active windows (per-class position bounds at step T).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActiveWindow {
    pub t: u32,
    pub k1: u32,
    pub kk1: u32,
    pub k2: u32,
    pub kk2: u32,
    pub k3: u32,
    pub kk3: u32,
    /// Envelope of the phase-4 t-arithmetic carry chain (the comparison
    /// must reach the end of the t' field).
    pub kk3_wide: u32,
    pub k4: u32,
    pub kk4: u32,
    pub k5: u32,
    pub kk5: u32,
    /// Envelope actually synthesized for the lrp update: the new r' can be
    /// as short as one bit at any boundary (not only at termination), so
    /// its most-significant-bit scan must reach the register end. The
    /// published T/4+4 bound only holds for the previous remainder.
    pub kk5_wide: u32,
    /// Synthesized lower bounds. The published golden-ratio bounds are
    /// violated by sustained quotient-2 profiles (silver-ratio growth), so
    /// the emitted envelopes use the silver-ratio constant instead.
    pub k1e: u32,
    pub k2e: u32,
    pub k4e: u32,
    pub k5e: u32,
}

/// Exact evaluation of the step-T window formulas.
pub fn active_windows(n: u32, t: u32) -> ActiveWindow {
    assert!(t >= 1);
    let ni = n as i64;
    let ti = t as i64;
    let k1 = exact::ceil_div_4c_minus(ti - ni - 2, 1).max(1) as u32 + 2;
    let kk1 = n + 3;
    let k2 = exact::ceil_div_4c_minus(ti - 3 * (ni + 2), 3).max(1) as u32 + 1;
    let kk2 = (t / 2 + 2).min(n + 2);
    let k3 = 1;
    let kk3 = (t.div_ceil(4) + 1).min(n + 1);
    let kk3_wide = (t / 4 + 2).min(n + 2);
    let k4 = exact::ceil_div_4c_minus(ti - 4 * (ni + 2), 4).max(1) as u32;
    let kk4 = (t / 4 + 3).min(n + 3);
    let k5 = exact::ceil_t_over_4c(t).max(1);
    let kk5 = (t / 4 + 4).min(n + 3);
    let kk5_wide = n + 3;
    // Synthesized lower bounds: silver-ratio analogue of the published
    // formulas minus a slack of two positions (mixed quotient prefixes dip
    // transiently below the sustained silver rate), clamped at the
    // structurally provable floors (lt >= 1, lq >= 0, the guard regions).
    let slack = 2;
    let k1e = (exact::ceil_div_4c2_minus(ti - ni - 2, 1) - slack).max(1) as u32 + 2;
    let k2e = (exact::ceil_div_4c2_minus(ti - 3 * (ni + 2), 3) - slack).max(1) as u32 + 1;
    let k4e = (exact::ceil_div_4c2_minus(ti - 4 * (ni + 2), 4) - slack).max(1) as u32;
    let k5e = (exact::ceil_t_over_4c2(t) as i64 - slack).max(3) as u32;
    ActiveWindow {
        t,
        k1,
        kk1,
        k2,
        kk2,
        k3,
        kk3,
        kk3_wide,
        k4,
        kk4,
        k5,
        kk5,
        kk5_wide,
        k1e,
        k2e,
        k4e,
        k5e,
    }
}

/// The step schedule: total steps and which steps carry the
/// end-of-iteration machinery (multiples of four).
#[derive(Debug, Clone, Serialize)]
pub struct StepSchedule {
    pub n: u32,
    pub total_steps: u32,
    pub nominal_steps: u32,
}

impl StepSchedule {
    pub fn for_size(n: u32) -> StepSchedule {
        let nominal = model::total_steps(n);
        StepSchedule {
            n,
            total_steps: nominal,
            nominal_steps: nominal,
        }
    }

    /// Per-modulus schedule: max of the nominal bound and the true worst
    /// case over inputs (the nominal bound alone is not sound for
    /// silver-ratio quotient profiles).
    pub fn for_modulus(p: u64) -> StepSchedule {
        let n = bitlen(p);
        let nominal = model::total_steps(n);
        StepSchedule {
            n,
            total_steps: model::schedule_steps(p),
            nominal_steps: nominal,
        }
    }

    pub fn is_boundary_step(&self, t: u32) -> bool {
        t.is_multiple_of(4)
    }
}

/// What to synthesize against: a concrete odd-prime modulus (simulable,
/// schedule widened to the true worst case) or a bare size (resource
/// counting; the modulus bit pattern is all-ones and the schedule nominal).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTarget {
    Modulus(u64),
    Size(u32),
}

impl SynthTarget {
    pub fn n(&self) -> u32 {
        match self {
            SynthTarget::Modulus(p) => bitlen(*p),
            SynthTarget::Size(n) => *n,
        }
    }

    /// Modulus bits, LSB first, length n.
    pub fn p_bits(&self) -> Vec<bool> {
        match self {
            SynthTarget::Modulus(p) => (0..bitlen(*p)).map(|i| p >> i & 1 == 1).collect(),
            SynthTarget::Size(n) => vec![true; *n as usize],
        }
    }

    pub fn schedule(&self) -> StepSchedule {
        match self {
            SynthTarget::Modulus(p) => StepSchedule::for_modulus(*p),
            SynthTarget::Size(n) => StepSchedule::for_size(*n),
        }
    }
}

fn bits_to_u64(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | ((b as u64) << i))
}

/// Little-endian bit vector of (value + 1) mod 2^len.
fn plus_one_bits(bits: &[bool]) -> Vec<bool> {
    let mut out = bits.to_vec();
    for b in out.iter_mut() {
        if *b {
            *b = false;
        } else {
            *b = true;
            return out;
        }
    }
    out
}

/// Little-endian bits of floor(value / 2).
fn half_bits(bits: &[bool]) -> Vec<bool> {
    let mut out = bits[1..].to_vec();
    out.push(false);
    out
}

/// Synthesizer for one instance: owns the layout and schedule, emits steps
/// and the full inversion into any sink.
pub struct Synthesizer {
    pub layout: QubitLayout,
    pub schedule: StepSchedule,
    pub target: SynthTarget,
}

impl Synthesizer {
    pub fn new(target: SynthTarget) -> Synthesizer {
        let n = target.n();
        assert!(n >= 3, "need n >= 3");
        Synthesizer {
            layout: QubitLayout::new(n),
            schedule: target.schedule(),
            target,
        }
    }

    /// One full step circuit at step index t (1-based).
    pub fn emit_step(&self, t: u32, sink: &mut impl GateSink) {
        let l = &self.layout;
        let n = l.n;
        let w = active_windows(n, t);
        let lt = l.lt_reg();
        let lq = l.lq_reg();
        let lrp = l.lrp_reg();
        let ls = l.ls_reg();
        let scratch = l.scratch();
        let bank = scratch.bank().to_vec();
        let (p1, p2, sign, ctrl) = (l.phase1, l.phase2, l.sign, l.ctrl);
        let work2: Vec<u32> = l.work2_wires();
        let w1f = |p: u32| l.w1(p);
        let w2f = |p: u32| l.w2(p);

        // -- Pre-shift block (Phase1 = 0): left shift, ls += 1; if Phase2,
        // right shift twice, ls -= 2.
        sink.begin_block(&format!("preshift@T={t}"));
        sink.gate(Gate::not_with(&[Control::neg(p1)], ctrl));
        cyclic_shift(sink, Some(ctrl), &work2, ShiftDir::Left, 1);
        ls.tick_up(sink, Some(Control::pos(ctrl)), &bank);
        sink.gate(Gate::not_with(&[Control::neg(p1)], ctrl));
        sink.gate(Gate::not_with(&[Control::neg(p1), Control::pos(p2)], ctrl));
        cyclic_shift(sink, Some(ctrl), &work2, ShiftDir::Right, 2);
        blocks::constant_subtractor(
            sink,
            Some(Control::pos(ctrl)),
            ls.value_bits(),
            2,
            Some(ls.sign()),
            &bank,
        );
        sink.gate(Gate::not_with(&[Control::neg(p1), Control::pos(p2)], ctrl));
        sink.end_block();

        // -- Arithmetic block 1: (Sign, r) -= 2^ls r' and the conditional
        // re-add, both in the [k1, n+3] envelope. Walker setups: the lq
        // register becomes lt+lq+1-K (sign set at and above the window
        // top), the ls register is already pos-(n+3-ls)-1 at the K = n+3
        // anchor (sign set at and below the window bottom).
        if w.k1e <= w.kk1 {
            sink.begin_block(&format!("r_sub@T={t}"));
            sink.gate(Gate::not_with(&[Control::neg(p1)], ctrl));
            self.b1_setup(sink, &w, true);
            LocAddSub {
                ctrl,
                k: w.k1e,
                kk: w.kk1,
                w1: &w1f,
                w2: &w2f,
                target: Target::Work1,
                subtract: true,
                capture: Some(sign),
                lsb_walker: Some(Walker {
                    reg: &ls,
                    tick_out: -1,
                }),
                msb_walker: Walker {
                    reg: &lq,
                    tick_out: 1,
                },
                addend_walker: None,
                descending: true,
                scratch: &scratch,
            }
            .emit(sink);
            self.b1_setup(sink, &w, false);
            sink.gate(Gate::not_with(&[Control::neg(p1)], ctrl));
            sink.end_block();
        }

        // Sign ^= !Phase1 & Phase2.
        sink.begin_block(&format!("sign_flip@T={t}"));
        sink.gate(Gate::not_with(&[Control::neg(p1), Control::pos(p2)], sign));
        sink.end_block();

        if w.k1e <= w.kk1 {
            // Re-add r += 2^ls r' when !Phase1 and !(Phase2 & Sign).
            sink.begin_block(&format!("r_add@T={t}"));
            sink.gate(Gate::ccx(p2, sign, scratch.h()));
            sink.gate(Gate::not_with(
                &[Control::neg(p1), Control::neg(scratch.h())],
                ctrl,
            ));
            self.b1_setup(sink, &w, true);
            LocAddSub {
                ctrl,
                k: w.k1e,
                kk: w.kk1,
                w1: &w1f,
                w2: &w2f,
                target: Target::Work1,
                subtract: false,
                capture: None,
                lsb_walker: Some(Walker {
                    reg: &ls,
                    tick_out: -1,
                }),
                msb_walker: Walker {
                    reg: &lq,
                    tick_out: 1,
                },
                addend_walker: None,
                descending: true,
                scratch: &scratch,
            }
            .emit(sink);
            self.b1_setup(sink, &w, false);
            sink.gate(Gate::not_with(
                &[Control::neg(p1), Control::neg(scratch.h())],
                ctrl,
            ));
            sink.gate(Gate::ccx(p2, sign, scratch.h()));
            sink.end_block();
        }

        // -- Arithmetic block 2: location-controlled swap of Sign and the
        // work1 qubit at lt+lq+1, with the q-field grown before the swap in
        // phase 2 and shrunk after it in phase 3.
        sink.begin_block(&format!("loc_swap@T={t}"));
        sink.gate(Gate::not_with(&[Control::neg(p1), Control::pos(p2)], ctrl));
        lq.tick_up(sink, Some(Control::pos(ctrl)), &bank);
        sink.gate(Gate::not_with(&[Control::neg(p1), Control::pos(p2)], ctrl));
        if w.k2e <= w.kk2 {
            sink.gate(Gate::cx(p1, ctrl));
            sink.gate(Gate::cx(p2, ctrl));
            loc_swap(sink, ctrl, w.k2e, w.kk2, &w1f, &lq, &lt, sign, &scratch);
            sink.gate(Gate::cx(p1, ctrl));
            sink.gate(Gate::cx(p2, ctrl));
        }
        sink.gate(Gate::not_with(&[Control::pos(p1), Control::neg(p2)], ctrl));
        lq.tick_down(sink, Some(Control::pos(ctrl)), &bank);
        sink.gate(Gate::not_with(&[Control::pos(p1), Control::neg(p2)], ctrl));
        sink.end_block();

        // -- Arithmetic block 3, phase-3 and phase-4 instances. Phase 3
        // (Phase2 = 0): window [1, lt+1], capture at the lt+1 transition.
        // Phase 4 (Phase2 = 1): the target window runs to the end of the
        // t' field (negated ls+lrp walker); the addend stays [1, lt+1].
        sink.begin_block(&format!("t_sub@T={t}"));
        self.emit_t_block(sink, t, &w, false, true, false, true);
        self.emit_t_block(sink, t, &w, true, true, false, false);
        sink.end_block();
        sink.begin_block(&format!("sign_flip_t@T={t}"));
        sink.gate(Gate::cx(p1, sign));
        sink.end_block();
        sink.begin_block(&format!("t_add@T={t}"));
        self.emit_t_block(sink, t, &w, false, false, true, false);
        self.emit_t_block(sink, t, &w, true, false, true, false);
        sink.end_block();

        // -- Post-shift block (Phase1 = 1).
        sink.begin_block(&format!("postshift@T={t}"));
        cyclic_shift(sink, Some(p1), &work2, ShiftDir::Left, 1);
        ls.tick_up(sink, Some(Control::pos(p1)), &bank);
        sink.gate(Gate::ccx(p1, p2, ctrl));
        cyclic_shift(sink, Some(ctrl), &work2, ShiftDir::Right, 2);
        blocks::constant_subtractor(
            sink,
            Some(Control::pos(ctrl)),
            ls.value_bits(),
            2,
            Some(ls.sign()),
            &bank,
        );
        sink.gate(Gate::ccx(p1, p2, ctrl));
        sink.end_block();

        // -- Phase update: gated on lq = 0 (sign set) and lrp > 0 (sign
        // clear), then the unconditional ls = 0 toggles.
        sink.begin_block(&format!("phase_update@T={t}"));
        sink.gate(Gate::not_with(
            &[Control::pos(lq.sign()), Control::neg(lrp.sign())],
            ctrl,
        ));
        sink.gate(Gate::ccx(sign, ctrl, p2));
        sink.gate(Gate::ccx(p1, ctrl, p2));
        sink.gate(Gate::ccx(p2, ctrl, sign));
        sink.gate(Gate::not_with(
            &[Control::pos(lq.sign()), Control::neg(lrp.sign())],
            ctrl,
        ));
        sink.gate(Gate::cx(ls.sign(), p1));
        sink.gate(Gate::cx(ls.sign(), p2));
        sink.end_block();

        // -- End of one EEA iteration (multiples of four only): full
        // register swap, both length updates, Iter toggle, all under
        // lq = 0 and ls = 0.
        if self.schedule.is_boundary_step(t) {
            sink.begin_block(&format!("iter_swap@T={t}"));
            sink.gate(Gate::ccx(lq.sign(), ls.sign(), ctrl));
            for pos in 1..=n + 3 {
                sink.gate(Gate::cswap(ctrl, l.w1(pos), l.w2(pos)));
            }
            sink.end_block();
            sink.begin_block(&format!("len_t@T={t}"));
            // Guard allows positions up to n+2-lrp (one short of the old r'
            // field, whose first slot is a guaranteed leading zero); the
            // tighter offset keeps the walker within the register range at
            // n = 2^k - 1.
            length_update(
                sink,
                ctrl,
                w.k4e,
                w.kk4,
                true,
                &w1f,
                &w2f,
                &ls,
                &lq,
                &lrp,
                w.kk4 as i64 - (n as i64 + 2),
                &lt,
                &scratch,
            );
            sink.end_block();
            sink.begin_block(&format!("len_rp@T={t}"));
            length_update(
                sink,
                ctrl,
                w.k5e,
                w.kk5_wide,
                false,
                &w2f,
                &w1f,
                &ls,
                &lq,
                &lt,
                2 - w.k5e as i64,
                &lrp,
                &scratch,
            );
            sink.end_block();
            sink.begin_block(&format!("iter_toggle@T={t}"));
            sink.gate(Gate::cx(ctrl, l.iter));
            sink.gate(Gate::ccx(lq.sign(), ls.sign(), ctrl));
            sink.end_block();
        }
    }

    /// Walker setups for the r-arithmetic envelope [k1, K1].
    fn b1_setup(&self, sink: &mut impl GateSink, w: &ActiveWindow, fwd: bool) {
        let l = &self.layout;
        let n = l.n;
        let (lt, lq, ls) = (l.lt_reg(), l.lq_reg(), l.ls_reg());
        let scratch = l.scratch();
        let bank = scratch.bank().to_vec();
        if fwd {
            lq.add_reg(sink, &lt, scratch.anc(), false);
            lq.add_const(sink, 3 - w.kk1 as i64, &bank);
            ls.add_const(sink, w.kk1 as i64 - (n as i64 + 3), &bank);
        } else {
            ls.add_const(sink, n as i64 + 3 - w.kk1 as i64, &bank);
            lq.add_const(sink, w.kk1 as i64 - 3, &bank);
            lq.add_reg(sink, &lt, scratch.anc(), true);
        }
    }

    /// One t-arithmetic instance (phase 3 or phase 4; subtract or add).
    #[allow(clippy::too_many_arguments)]
    fn emit_t_block(
        &self,
        sink: &mut impl GateSink,
        _t: u32,
        w: &ActiveWindow,
        phase4: bool,
        subtract: bool,
        capture: bool,
        gate_on_not_sign: bool,
    ) {
        let l = &self.layout;
        let n = l.n;
        let lt = l.lt_reg();
        let ls = l.ls_reg();
        let scratch = l.scratch();
        let bank = scratch.bank().to_vec();
        let (p1, p2, sign, ctrl) = (l.phase1, l.phase2, l.sign, l.ctrl);
        let w1f = |p: u32| l.w1(p);
        let w2f = |p: u32| l.w2(p);
        let kk = if phase4 { w.kk3_wide } else { w.kk3 };
        let p2c = if phase4 {
            Control::pos(p2)
        } else {
            Control::neg(p2)
        };
        // Block control: P1 & (phase2 match) [& !Sign for the phase-3 sub].
        let ctrl_on = |sink: &mut dyn GateSink| {
            if gate_on_not_sign {
                sink.gate(Gate::not_with(&[Control::pos(p1), p2c], scratch.h()));
                sink.gate(Gate::not_with(
                    &[Control::pos(scratch.h()), Control::neg(sign)],
                    ctrl,
                ));
            } else {
                sink.gate(Gate::not_with(&[Control::pos(p1), p2c], ctrl));
            }
        };
        let ctrl_off = |sink: &mut dyn GateSink| {
            if gate_on_not_sign {
                sink.gate(Gate::not_with(
                    &[Control::pos(scratch.h()), Control::neg(sign)],
                    ctrl,
                ));
                sink.gate(Gate::not_with(&[Control::pos(p1), p2c], scratch.h()));
            } else {
                sink.gate(Gate::not_with(&[Control::pos(p1), p2c], ctrl));
            }
        };
        ctrl_on(sink);
        if phase4 {
            // TOP walker on ls: stored = (n+3-ls-lrp) - pos. Negate ls,
            // subtract the zero-extended lrp, then shift to position k=1.
            // No separate addend mask: in phase 4 the q-field is empty and
            // r's significant bits sit strictly beyond the window top, so
            // Work1 positions above lt+1 inside the window read zero and
            // the target mask alone gates the addend correctly.
            for &b in &l.ls {
                sink.gate(Gate::x(b));
            }
            let ext_bits: Vec<u32> = {
                let mut v = l.lrp.clone();
                v.push(scratch.g());
                v
            };
            blocks::cuccaro_adder(sink, None, &ext_bits, &l.ls, scratch.anc(), true, None);
            ls.add_const(sink, n as i64 + 1, &bank);
            LocAddSub {
                ctrl,
                k: 1,
                kk,
                w1: &w1f,
                w2: &w2f,
                target: Target::Work2,
                subtract,
                capture: if capture { Some(sign) } else { None },
                lsb_walker: None,
                msb_walker: Walker {
                    reg: &ls,
                    tick_out: -1,
                },
                addend_walker: None,
                descending: false,
                scratch: &scratch,
            }
            .emit(sink);
            ls.add_const(sink, -(n as i64) - 1, &bank);
            blocks::cuccaro_adder(sink, None, &ext_bits, &l.ls, scratch.anc(), false, None);
            for &b in &l.ls {
                sink.gate(Gate::x(b));
            }
        } else {
            // lt walker: stored = lt + 1 - pos; sign clear inside [1, lt+1].
            lt.add_const(sink, 1, &bank);
            LocAddSub {
                ctrl,
                k: 1,
                kk,
                w1: &w1f,
                w2: &w2f,
                target: Target::Work2,
                subtract,
                capture: if capture { Some(sign) } else { None },
                lsb_walker: None,
                msb_walker: Walker {
                    reg: &lt,
                    tick_out: -1,
                },
                addend_walker: None,
                descending: false,
                scratch: &scratch,
            }
            .emit(sink);
            lt.add_const(sink, -1, &bank);
        }
        ctrl_off(sink);
    }

    /// Classical initialization: Work1 = |100, p>, length registers to the
    /// stored-minus-one encodings of (1, 0, *, 0). The lrp register gets
    /// bitlen(x') from a latch scan in the preamble.
    fn emit_init(&self, sink: &mut impl GateSink) {
        let l = &self.layout;
        let n = l.n;
        sink.begin_block("init");
        sink.gate(Gate::x(l.w1(1)));
        let p_bits = self.target.p_bits();
        for (i, &b) in p_bits.iter().enumerate() {
            if b {
                sink.gate(Gate::x(l.w1(n + 3 - i as u32)));
            }
        }
        for &b in l.lq.iter().chain(&l.lrp).chain(&l.ls) {
            sink.gate(Gate::x(b));
        }
        sink.end_block();
    }

    /// The Algorithm-1 preamble: Iter ^= (x > p/2); if Iter, x <- p - x;
    /// then scan the bit length of x' into the lrp register.
    fn emit_preamble(&self, sink: &mut impl GateSink) {
        let l = &self.layout;
        let scratch = l.scratch();
        sink.begin_block("preamble");
        let x_field = l.x_field();
        let p_bits = self.target.p_bits();
        // The preamble runs while every scratch wire is free; the full
        // register serves as the carry bank (the comparison needs n slots).
        compare_gt_const_bits(sink, &x_field, &half_bits(&p_bits), l.iter, &l.scratch);
        conditional_p_minus_x(sink, Control::pos(l.iter), &x_field, &p_bits, &l.scratch);
        let lrp = l.lrp_reg();
        let w2f = |p: u32| l.w2(p);
        bitlen_scan(sink, 4, l.n + 3, &w2f, &lrp, &scratch);
        sink.end_block();
    }

    /// Copy t' (Work2 un-rotated) into the output register, then apply the
    /// Iter-controlled p - output correction.
    fn emit_copy_and_correct(&self, sink: &mut impl GateSink) {
        let l = &self.layout;
        let work2 = l.work2_wires();
        let ls = l.ls_reg();
        sink.begin_block("copy");
        blocks::loc_copy(sink, &work2, &ls, &l.output);
        sink.end_block();
        sink.begin_block("correction");
        let p_bits = self.target.p_bits();
        conditional_p_minus_x(sink, Control::neg(l.iter), &l.output, &p_bits, &l.scratch);
        sink.end_block();
    }

    /// The complete inversion circuit: |x>|0^n>|0..> -> |x>|x^-1 mod p>|0..>.
    pub fn emit_inversion(&self, sink: &mut impl GateSink) {
        self.emit_init(sink);
        self.emit_preamble(sink);
        for t in 1..=self.schedule.total_steps {
            self.emit_step(t, sink);
        }
        self.emit_copy_and_correct(sink);
        for t in (1..=self.schedule.total_steps).rev() {
            let mut buf = BufferSink::default();
            self.emit_step(t, &mut buf);
            sink.begin_block(&format!("unstep@T={t}"));
            blocks::emit_reversed(sink, &buf.gates);
            sink.end_block();
        }
        let mut buf = BufferSink::default();
        self.emit_init(&mut buf);
        self.emit_preamble(&mut buf);
        sink.begin_block("epilogue");
        blocks::emit_reversed(sink, &buf.gates);
        sink.end_block();
    }

    /// Materialized, lowered step circuit (for simulation and verification).
    pub fn step_circuit(&self, t: u32) -> Circuit {
        let mut c = Circuit::new(self.layout.total_width());
        self.emit_step(t, &mut c);
        c.lower().expect("step circuit lowers")
    }

    /// Materialized, lowered full inversion circuit.
    pub fn inversion_circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.layout.total_width());
        c.layout = self.layout.regions();
        self.emit_inversion(&mut c);
        c.lower().expect("inversion circuit lowers")
    }

    /// Encode a machine state onto the wires (flags, lengths, registers);
    /// scratch, ctrl and output wires are untouched.
    pub fn encode_state(&self, s: &MachineState, bits: &mut BitState) {
        let l = &self.layout;
        let n = l.n;
        assert_eq!(s.n, n);
        for pos in 1..=n + 3 {
            bits.set(l.w1(pos), s.work1 >> (pos - 1) & 1 == 1);
            bits.set(l.w2(pos), s.work2 >> (pos - 1) & 1 == 1);
        }
        let enc = |bits: &mut BitState, reg: &[u32], value: i64| {
            let stored = value as u64;
            for (i, &wire) in reg.iter().enumerate() {
                bits.set(wire, stored >> i & 1 == 1);
            }
        };
        enc(bits, &l.lt, s.lt as i64 - 1);
        enc(bits, &l.lq, s.lq as i64 - 1);
        enc(bits, &l.lrp, s.lrp as i64 - 1);
        enc(bits, &l.ls, s.ls as i64 - 1);
        bits.set(l.phase1, s.phase1);
        bits.set(l.phase2, s.phase2);
        bits.set(l.sign, s.sign);
        bits.set(l.iter, s.iter);
    }

    /// Decode the machine state from the wires.
    pub fn decode_state(&self, bits: &BitState) -> MachineState {
        let l = &self.layout;
        let n = l.n;
        let mut work1 = 0u64;
        let mut work2 = 0u64;
        for pos in 1..=n + 3 {
            if bits.get(l.w1(pos)) {
                work1 |= 1 << (pos - 1);
            }
            if bits.get(l.w2(pos)) {
                work2 |= 1 << (pos - 1);
            }
        }
        let dec = |reg: &[u32]| -> u32 {
            let w = reg.len();
            let mut raw = 0u64;
            for (i, &wire) in reg.iter().enumerate() {
                if bits.get(wire) {
                    raw |= 1 << i;
                }
            }
            let signed = if raw >> (w - 1) & 1 == 1 {
                raw as i64 - (1i64 << w)
            } else {
                raw as i64
            };
            (signed + 1) as u32
        };
        MachineState {
            n,
            work1,
            work2,
            lt: dec(&l.lt),
            lq: dec(&l.lq),
            lrp: dec(&l.lrp),
            ls: dec(&l.ls),
            phase1: bits.get(l.phase1),
            phase2: bits.get(l.phase2),
            sign: bits.get(l.sign),
            iter: bits.get(l.iter),
        }
    }

    /// True when every scratch/ctrl wire is clean.
    pub fn scratch_clean(&self, bits: &BitState) -> bool {
        self.layout.scratch.iter().all(|&w| !bits.get(w)) && !bits.get(self.layout.ctrl)
    }
}

/// Window-soundness audit: run the reference machine over every input of a
/// modulus and compare each step's operand positions against both the
/// published window formulas and the synthesized envelopes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct WindowAudit {
    pub checks: u64,
    /// Violations of the published per-class bounds, keyed k1/k2/k3/k4/k5.
    pub paper_violations: [u64; 5],
    /// Violations of the synthesized envelopes (must be zero).
    pub emitted_violations: u64,
    /// One example per violating class: (p, x, t, position).
    pub examples: Vec<(String, u64, u64, u32, u32)>,
}

pub fn window_audit(p: u64, audit: &mut WindowAudit) {
    let n = bitlen(p);
    let steps = model::schedule_steps(p);
    for x in 1..p {
        let inst = ProblemInstance::new(p, x).expect("audit modulus must be prime");
        let mut s = MachineState::init(&inst);
        for t in 1..=steps {
            let u = model::window_usage(&s);
            let w = active_windows(n, t);
            audit.checks += 1;
            let mut paper = |class: usize, name: &str, pos: u32, ok: bool| {
                if !ok {
                    audit.paper_violations[class] += 1;
                    if audit.examples.iter().all(|(c, ..)| c != name) {
                        audit.examples.push((name.to_string(), p, x, t, pos));
                    }
                }
            };
            let mut emitted_ok = true;
            if let Some((a, b)) = u.r_ops {
                paper(0, "k1", a, a >= w.k1 && b <= w.kk1);
                emitted_ok &= a >= w.k1e && b <= w.kk1;
            }
            if let Some(j) = u.swap_pos {
                paper(1, "k2", j, j >= w.k2 && j <= w.kk2);
                emitted_ok &= j >= w.k2e && j <= w.kk2;
            }
            if let Some(top) = u.t_top {
                paper(2, "k3", top, top <= w.kk3);
                emitted_ok &= top <= w.kk3;
            }
            if let Some(wide) = u.t_top_wide {
                emitted_ok &= wide <= w.kk3_wide;
            }
            if let Some((lo, hi)) = u.len_t {
                paper(3, "k4", lo, lo >= w.k4 && hi <= w.kk4);
                emitted_ok &= lo >= w.k4e && hi <= w.kk4;
            }
            if let Some((lo, hi)) = u.len_rp {
                paper(
                    4,
                    "k5",
                    if lo < w.k5 { lo } else { hi },
                    lo >= w.k5 && hi <= w.kk5,
                );
                emitted_ok &= lo >= w.k5e && hi <= w.kk5_wide;
            }
            if !emitted_ok {
                audit.emitted_violations += 1;
                if audit.examples.iter().all(|(c, ..)| c != "emitted") {
                    audit.examples.push(("emitted".into(), p, x, t, 0));
                }
            }
            s = s.step();
        }
    }
}

/// Bit-slice version of the comparison chain (value > threshold into out).
fn compare_gt_const_bits(
    sink: &mut impl GateSink,
    target: &[u32],
    threshold_bits: &[bool],
    out: u32,
    bank: &[u32],
) {
    let w = target.len();
    assert_eq!(threshold_bits.len(), w);
    if w <= 48 {
        compare_gt_const(sink, target, bits_to_u64(threshold_bits), out, bank);
        return;
    }
    let konst: Vec<bool> = threshold_bits.iter().map(|&b| !b).collect();
    let mut buf = BufferSink::default();
    emit_carry_chain_bits(&mut buf, target, &konst, bank);
    for g in &buf.gates {
        sink.gate(*g);
    }
    sink.gate(Gate::cx(bank[w - 1], out));
    blocks::emit_reversed(sink, &buf.gates);
}

fn emit_carry_chain_bits(sink: &mut impl GateSink, target: &[u32], kbits: &[bool], bank: &[u32]) {
    let w = target.len();
    if kbits[0] {
        sink.gate(Gate::cx(target[0], bank[0]));
    }
    for i in 1..w {
        if kbits[i] {
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

/// Conditional x -> p - x on an n-bit field (bit-slice constant).
fn conditional_p_minus_x(
    sink: &mut impl GateSink,
    ctrl: Control,
    target: &[u32],
    p_bits: &[bool],
    bank: &[u32],
) {
    let w = target.len();
    assert_eq!(p_bits.len(), w);
    if w <= 48 {
        conditional_const_subtract_from(sink, ctrl, target, bits_to_u64(p_bits), bank);
        return;
    }
    for &t in target {
        sink.gate(Gate::not_with(&[ctrl], t));
    }
    let konst = plus_one_bits(p_bits);
    constant_adder_bits(sink, Some(ctrl), target, &konst, None, bank);
}

/// Wide constant adder over a bit-slice constant (the same construction as
/// blocks::constant_adder, for fields beyond u64).
fn constant_adder_bits(
    sink: &mut impl GateSink,
    ctrl: Option<Control>,
    target: &[u32],
    kbits: &[bool],
    capture: Option<u32>,
    bank: &[u32],
) {
    let w = target.len();
    assert_eq!(kbits.len(), w);
    let j0 = match kbits.iter().position(|&b| b) {
        Some(j) => j,
        None => return,
    };
    let slots = &bank[..w - j0];
    let slot = |i: usize| slots[i - j0];
    let write_not = |sink: &mut dyn GateSink, extra: Option<Control>, t: u32| {
        let mut cs: Vec<Control> = Vec::new();
        if let Some(c) = ctrl {
            cs.push(c);
        }
        if let Some(c) = extra {
            cs.push(c);
        }
        sink.gate(Gate::not_with(&cs, t));
    };
    sink.gate(Gate::cx(target[j0], slot(j0)));
    for i in j0 + 1..w {
        if kbits[i] {
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
        write_not(sink, Some(Control::pos(slot(w - 1))), z);
    }
    for i in (j0 + 1..w).rev() {
        if kbits[i] {
            sink.gate(Gate::x(slot(i)));
            sink.gate(Gate::not_with(
                &[Control::neg(slot(i - 1)), Control::neg(target[i])],
                slot(i),
            ));
        } else {
            sink.gate(Gate::ccx(slot(i - 1), target[i], slot(i)));
        }
        write_not(sink, Some(Control::pos(slot(i - 1))), target[i]);
        if kbits[i] {
            write_not(sink, None, target[i]);
        }
    }
    sink.gate(Gate::cx(target[j0], slot(j0)));
    write_not(sink, None, target[j0]);
}

/// Simulate the full inversion circuit for one input.
pub fn simulate_inversion(synth: &Synthesizer, circuit: &Circuit, x: u64) -> (u64, BitState) {
    let l = &synth.layout;
    let mut bits = BitState::zeros(l.total_width() as usize);
    for (i, &wire) in l.input.iter().enumerate() {
        bits.set(wire, x >> i & 1 == 1);
    }
    let out = circuit.apply(&bits).expect("width matches");
    let mut result = 0u64;
    for (i, &wire) in l.output.iter().enumerate() {
        if out.get(wire) {
            result |= 1 << i;
        }
    }
    (result, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mod_inverse_oracle, schedule_steps};

    #[test]
    fn window_formula_examples() {
        let w = active_windows(6, 1);
        assert_eq!((w.k1, w.kk1), (3, 9));
        let w8 = active_windows(6, 8);
        assert_eq!((w8.k2, w8.kk2), (2, 6));
    }

    #[test]
    fn windows_nonempty_through_schedule() {
        for n in [3u32, 4, 6, 8, 16, 64, 128, 256, 512] {
            for t in 1..=model::total_steps(n) {
                let w = active_windows(n, t);
                assert!(w.k2 <= w.kk2, "n={n} t={t} k2={} K2={}", w.k2, w.kk2);
                assert!(w.k3 <= w.kk3 && w.kk3 <= w.kk3_wide, "n={n} t={t}");
                if t % 4 == 0 {
                    assert!(w.k4 <= w.kk4, "n={n} t={t} k4={} K4={}", w.k4, w.kk4);
                    assert!(w.k5 <= w.kk5, "n={n} t={t} k5={} K5={}", w.k5, w.kk5);
                }
            }
        }
    }

    #[test]
    fn layout_widths() {
        for n in [7u32, 8, 16, 32, 64, 128, 256, 512] {
            let l = QubitLayout::new(n);
            let expect = 3 * n + 4 * n.ilog2() + 20;
            assert_eq!(l.inversion_width(), expect, "n={n}");
            assert_eq!(l.total_width(), expect + n);
        }
        // n=16: three length registers of 6 plus one of 7 = 25 wires.
        let l16 = QubitLayout::new(16);
        assert_eq!(
            l16.lt.len() + l16.lq.len() + l16.lrp.len() + l16.ls.len(),
            25
        );
        // Small n carry extra scratch beyond the formula.
        for n in 3..7u32 {
            let l = QubitLayout::new(n);
            assert!(l.inversion_width() >= 3 * n + 4 * n.ilog2() + 20);
        }
    }

    #[test]
    fn layout_regions_disjoint() {
        let l = QubitLayout::new(8);
        let mut all: Vec<u32> = Vec::new();
        for (_, ws) in l.regions() {
            all.extend(ws);
        }
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), total);
        assert_eq!(all.len() as u32, l.total_width());
    }

    #[test]
    fn encode_decode_roundtrip() {
        let inst = ProblemInstance::new(37, 13).unwrap();
        let synth = Synthesizer::new(SynthTarget::Modulus(37));
        let mut s = MachineState::init(&inst);
        for _ in 0..10 {
            let mut bits = BitState::zeros(synth.layout.total_width() as usize);
            synth.encode_state(&s, &mut bits);
            assert_eq!(synth.decode_state(&bits), s);
            s = s.step();
        }
    }

    #[test]
    fn step_circuit_lockstep_p37_x13() {
        let inst = ProblemInstance::new(37, 13).unwrap();
        let synth = Synthesizer::new(SynthTarget::Modulus(37));
        let mut s = MachineState::init(&inst);
        let mut bits = BitState::zeros(synth.layout.total_width() as usize);
        synth.encode_state(&s, &mut bits);
        for t in 1..=synth.schedule.total_steps {
            let c = synth.step_circuit(t);
            bits = c.apply(&bits).unwrap();
            s = s.step();
            assert_eq!(
                synth.decode_state(&bits),
                s,
                "state mismatch after step {t}"
            );
            assert!(synth.scratch_clean(&bits), "dirty scratch after step {t}");
        }
    }

    #[test]
    fn step_circuit_lockstep_p37_all_x() {
        let synth = Synthesizer::new(SynthTarget::Modulus(37));
        let circuits: Vec<Circuit> = (1..=synth.schedule.total_steps)
            .map(|t| synth.step_circuit(t))
            .collect();
        for x in 1..37 {
            let inst = ProblemInstance::new(37, x).unwrap();
            let mut s = MachineState::init(&inst);
            let mut bits = BitState::zeros(synth.layout.total_width() as usize);
            synth.encode_state(&s, &mut bits);
            for (t, c) in circuits.iter().enumerate() {
                bits = c.apply(&bits).unwrap();
                s = s.step();
                assert_eq!(synth.decode_state(&bits), s, "x={x} step {}", t + 1);
            }
        }
    }

    #[test]
    fn full_inversion_p37() {
        let synth = Synthesizer::new(SynthTarget::Modulus(37));
        let circuit = synth.inversion_circuit();
        for x in 1..37u64 {
            let (result, outbits) = simulate_inversion(&synth, &circuit, x);
            assert_eq!(result, mod_inverse_oracle(37, x), "x={x}");
            for (i, &wire) in synth.layout.input.iter().enumerate() {
                assert_eq!(outbits.get(wire), x >> i & 1 == 1, "x={x} input bit {i}");
            }
            let keep: Vec<u32> = synth
                .layout
                .output
                .iter()
                .chain(synth.layout.input.iter())
                .copied()
                .collect();
            for w in 0..synth.layout.total_width() {
                if !keep.contains(&w) {
                    assert!(!outbits.get(w), "x={x} wire {w} not restored");
                }
            }
        }
    }

    #[test]
    fn full_inversion_small_primes() {
        for p in [5u64, 7, 11, 13] {
            let synth = Synthesizer::new(SynthTarget::Modulus(p));
            let circuit = synth.inversion_circuit();
            for x in 1..p {
                let (result, _) = simulate_inversion(&synth, &circuit, x);
                assert_eq!(result, mod_inverse_oracle(p, x), "p={p} x={x}");
            }
        }
    }

    #[test]
    fn full_inversion_larger_sizes() {
        // Exercises the register-width edge cases (n = 2^k - 1 walker
        // excursions) and the desk-scale cap.
        for p in [16411u64, 32779, 1048573] {
            let synth = Synthesizer::new(SynthTarget::Modulus(p));
            let circuit = synth.inversion_circuit();
            for x in [1u64, 2, p / 3, p / 2, p - 1, 12345 % p] {
                let (got, _) = simulate_inversion(&synth, &circuit, x);
                assert_eq!(got, mod_inverse_oracle(p, x), "p={p} x={x}");
            }
        }
    }

    #[test]
    fn step_then_inverse_is_identity() {
        let synth = Synthesizer::new(SynthTarget::Modulus(37));
        let inst = ProblemInstance::new(37, 19).unwrap();
        let mut s = MachineState::init(&inst);
        for t in 1..=schedule_steps(37) {
            let c = synth.step_circuit(t);
            let inv = c.invert();
            let mut bits = BitState::zeros(synth.layout.total_width() as usize);
            synth.encode_state(&s, &mut bits);
            let round = inv.apply(&c.apply(&bits).unwrap()).unwrap();
            assert_eq!(round, bits, "t={t}");
            s = s.step();
        }
    }
}
