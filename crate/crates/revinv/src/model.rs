//! Bit-exact classical reference model of the space-efficient EEA step
//! machine: register layout, the optimized step and its inverse, full
//! inversion runs, per-step traces and the step-count bookkeeping.
//!
//! This model is the oracle the synthesized circuits are verified against.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("modulus {0} is not an odd prime")]
    NotPrime(u64),
    #[error("x = {x} out of range for p = {p} (need 1 <= x <= p-1)")]
    XOutOfRange { p: u64, x: u64 },
    #[error("modulus {0} too small (need n >= 3, i.e. p >= 5)")]
    TooSmall(u64),
}

pub fn bitlen(v: u64) -> u32 {
    64 - v.leading_zeros()
}

pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A modular-inversion instance: odd prime `p` of `n` bits, `x` in [1, p-1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemInstance {
    pub p: u64,
    pub x: u64,
    pub n: u32,
}

impl ProblemInstance {
    pub fn new(p: u64, x: u64) -> Result<Self, ModelError> {
        if !is_odd_prime(p) {
            return Err(ModelError::NotPrime(p));
        }
        let n = bitlen(p);
        if n < 3 {
            return Err(ModelError::TooSmall(p));
        }
        if x == 0 || x >= p {
            return Err(ModelError::XOutOfRange { p, x });
        }
        Ok(ProblemInstance { p, x, n })
    }
}

/// Decoded view of one machine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoded {
    pub t: u64,
    pub q: u64,
    pub r: u64,
    pub t_prime: u64,
    pub r_prime: u64,
}

/// Full machine state: two (n+3)-bit work registers, four length counters
/// and the control flags.
///
/// Register positions are 1-based with position 1 leftmost, stored as bit
/// (position-1) of the backing word. Work1 holds t (little-endian, one
/// appended zero), then q (big-endian), then r (big-endian). Work2, once
/// rotated right by `ls`, holds t' (little-endian) then r' (big-endian) in
/// its rightmost `lrp` positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MachineState {
    pub n: u32,
    pub work1: u64,
    pub work2: u64,
    pub lt: u32,
    pub lq: u32,
    pub lrp: u32,
    pub ls: u32,
    pub phase1: bool,
    pub phase2: bool,
    pub sign: bool,
    pub iter: bool,
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        !0
    } else {
        (1u64 << bits) - 1
    }
}

impl MachineState {
    pub fn width(&self) -> u32 {
        self.n + 3
    }

    fn rot_left(&self, v: u64, s: u32) -> u64 {
        // Register contents move one position toward position 1 per shift.
        let w = self.width();
        let s = s % w;
        if s == 0 {
            return v;
        }
        ((v >> s) | (v << (w - s))) & mask(w)
    }

    fn rot_right(&self, v: u64, s: u32) -> u64 {
        let w = self.width();
        self.rot_left(v, w - (s % w))
    }

    /// Position p (1-based) of a register value.
    fn bit(v: u64, pos: u32) -> bool {
        (v >> (pos - 1)) & 1 == 1
    }

    /// Big-endian read of positions [first, last].
    fn read_be(v: u64, first: u32, last: u32) -> u64 {
        let mut out = 0;
        for pos in first..=last {
            out = (out << 1) | ((v >> (pos - 1)) & 1);
        }
        out
    }

    fn write_be(v: &mut u64, first: u32, last: u32, mut value: u64) {
        for pos in (first..=last).rev() {
            *v = (*v & !(1 << (pos - 1))) | ((value & 1) << (pos - 1));
            value >>= 1;
        }
    }

    /// Work2 in the unrotated (base) frame.
    pub fn work2_base(&self) -> u64 {
        self.rot_right(self.work2, self.ls)
    }

    pub fn decode(&self) -> Decoded {
        let w = self.width();
        let t = self.work1 & mask(self.lt + 1);
        let q_field = if self.lq == 0 {
            0
        } else {
            Self::read_be(self.work1, self.lt + 2, self.lt + self.lq + 1)
        };
        let q = q_field << self.ls.min(60);
        let r = Self::read_be(self.work1, self.lt + self.lq + 2, w);
        let base = self.work2_base();
        let r_prime = if self.lrp == 0 {
            0
        } else {
            Self::read_be(base, w + 1 - self.lrp, w)
        };
        let t_prime = base & mask(w - self.lrp);
        Decoded {
            t,
            q,
            r,
            t_prime,
            r_prime,
        }
    }

    /// Boundary states (lq = 0, ls = 0) satisfy t*r + t'*r' = p.
    pub fn is_iteration_boundary(&self) -> bool {
        self.lq == 0 && self.ls == 0
    }

    /// Initial state: Work1 = |100, p>, Work2 = |000, x'>
    /// with x' = x or p-x, lengths (1, 0, bitlen(x'), 0), Iter set when the
    /// input was flipped.
    pub fn init(inst: &ProblemInstance) -> MachineState {
        let n = inst.n;
        let w = n + 3;
        let flip = 2 * inst.x > inst.p;
        let xp = if flip { inst.p - inst.x } else { inst.x };
        let mut work1 = 1u64; // t = 1, little-endian "10"
        Self::write_be(&mut work1, 3, w, inst.p);
        let mut work2 = 0u64;
        Self::write_be(&mut work2, 4, w, xp);
        MachineState {
            n,
            work1,
            work2,
            lt: 1,
            lq: 0,
            lrp: bitlen(xp),
            ls: 0,
            phase1: false,
            phase2: false,
            sign: false,
            iter: flip,
        }
    }

    /// Dynamic window of arithmetic block 1 (subtraction/re-addition on r's):
    /// positions [lt+lq+2, n+3-ls], possibly empty.
    pub fn block1_window(&self) -> Option<(u32, u32)> {
        let a = self.lt + self.lq + 2;
        let b = self.width() as i64 - self.ls as i64;
        if (a as i64) <= b {
            Some((a, b as u32))
        } else {
            None
        }
    }

    /// Target width of arithmetic block 3: lt+1 in phase 3 (the aligned t'
    /// stays below 2^(lt+1) there), the whole t' field in phase 4 (the
    /// comparison must see the already-reassembled high bits).
    pub fn block3_width(&self) -> u32 {
        if self.phase2 {
            let top = self.width() as i64 - self.ls as i64 - self.lrp as i64;
            debug_assert!(top > self.lt as i64);
            top.max(self.lt as i64 + 1) as u32
        } else {
            self.lt + 1
        }
    }

    fn sub_window_w1(&mut self, a: u32, b: u32) -> bool {
        // (Sign, r-window) -= v-window; returns whether a borrow occurred.
        let m = b - a + 1;
        let u = Self::read_be(self.work1, a, b);
        let v = Self::read_be(self.work2, a, b);
        let borrow = u < v;
        let diff = u.wrapping_sub(v) & mask(m);
        Self::write_be(&mut self.work1, a, b, diff);
        borrow
    }

    fn add_window_w1(&mut self, a: u32, b: u32) -> bool {
        let m = b - a + 1;
        let u = Self::read_be(self.work1, a, b);
        let v = Self::read_be(self.work2, a, b);
        let sum = u + v;
        Self::write_be(&mut self.work1, a, b, sum & mask(m));
        sum >> m == 1
    }

    /// Checks the reachable-state layout invariant the arithmetic blocks
    /// rely on: work2 bits strictly between the t'-low region and the
    /// r'-field are zero above position `from`.
    fn assert_zero_gap(&self, from: u32) {
        let hi = self.width() as i64 - self.ls as i64 - self.lrp as i64;
        let mut pos = from as i64;
        while pos <= hi {
            debug_assert!(
                !Self::bit(self.work2, pos as u32),
                "nonzero work2 bit at position {pos} inside the aligned gap"
            );
            pos += 1;
        }
    }

    /// One optimized EEA step.
    pub fn step(&self) -> MachineState {
        let mut s = *self;
        let w = s.width();
        if !s.phase1 {
            // Pre-shift.
            s.work2 = s.rot_left(s.work2, 1);
            s.ls += 1;
            if s.phase2 {
                s.work2 = s.rot_right(s.work2, 2);
                s.ls -= 2;
            }
            // Arithmetic block 1: (Sign, r) -= 2^ls r', conditional re-add.
            if let Some((a, b)) = s.block1_window() {
                s.assert_zero_gap(a);
                let borrowed = s.sub_window_w1(a, b);
                s.sign ^= borrowed;
                if s.phase2 {
                    s.sign = !s.sign;
                }
                if !s.phase2 || !s.sign {
                    let wrapped = s.add_window_w1(a, b);
                    debug_assert!(
                        !wrapped || borrowed,
                        "re-add overflowed without a preceding borrow"
                    );
                }
            } else if s.phase2 {
                s.sign = !s.sign;
            }
        }
        if s.phase1 != s.phase2 {
            // Arithmetic block 2: location-controlled swap, with the q-field
            // grown before the swap in phase 2 and shrunk after it in phase 3.
            if !s.phase1 {
                s.lq += 1;
            }
            let pos = s.lt + s.lq + 1;
            let bit = Self::bit(s.work1, pos);
            if bit != s.sign {
                s.work1 ^= 1 << (pos - 1);
            }
            s.sign = bit;
            if s.phase1 {
                s.lq -= 1;
            }
        }
        if s.phase1 {
            // Arithmetic block 3: t' updates against 2^ls t. In phase 3 the
            // division invariant keeps the aligned t' below 2^(lt+1), so the
            // window is the left-most lt+1 positions; in phase 4 the
            // comparison must see all of the shifted t', so the window runs
            // to the end of the t' field.
            let width = s.block3_width();
            debug_assert!(width > s.lt, "t' field shorter than t");
            if !s.phase2 {
                s.assert_zero_gap(s.lt + 2);
            } else {
                // Phase 4: the q-field is consumed and r's significant bits
                // live beyond the t'-field top, so work1 is zero between the
                // t field and the window top (the circuit's addend reads
                // rely on this).
                debug_assert_eq!(s.lq, 0, "phase 4 runs with an empty q field");
                for pos in s.lt + 2..=width {
                    debug_assert!(
                        !Self::bit(s.work1, pos),
                        "nonzero work1 bit at {pos} inside the phase-4 window"
                    );
                }
            }
            let t = s.work1 & mask(s.lt + 1);
            if s.phase2 || !s.sign {
                let tp = s.work2 & mask(width);
                let diff = tp.wrapping_sub(t) & mask(width);
                s.work2 = (s.work2 & !mask(width)) | diff;
            }
            s.sign = !s.sign;
            let tp = s.work2 & mask(width);
            let sum = tp + t;
            s.sign ^= sum >> width == 1;
            s.work2 = (s.work2 & !mask(width)) | (sum & mask(width));
            // Post-shift.
            s.work2 = s.rot_left(s.work2, 1);
            s.ls += 1;
            if s.phase2 {
                s.work2 = s.rot_right(s.work2, 2);
                s.ls -= 2;
            }
        }
        // Phase update; lrp = 0 marks termination and freezes the phases.
        if s.lq == 0 && s.lrp > 0 {
            s.phase2 ^= s.sign ^ s.phase1;
            s.sign ^= s.phase2;
        }
        if s.ls == 0 {
            s.phase1 = !s.phase1;
            s.phase2 = !s.phase2;
        }
        // End of one EEA iteration: swap registers, refresh lengths.
        if s.lq == 0 && s.ls == 0 {
            std::mem::swap(&mut s.work1, &mut s.work2);
            let t_new = s.work1 & mask(w - s.lrp);
            let r_new = Self::read_be(s.work2, s.lt + 2, w);
            s.lt = bitlen(t_new);
            s.lrp = bitlen(r_new);
            s.iter = !s.iter;
        }
        s
    }

    /// Exact inverse of `step` on reachable states.
    pub fn step_inverse(&self) -> MachineState {
        let mut s = *self;
        let w = s.width();
        if s.lq == 0 && s.ls == 0 {
            s.iter = !s.iter;
            // work1 = (t_new, r_old'), work2 = (t_old, r_new) right now.
            let t_old = s.work2 & mask(w - s.lrp);
            let r_old = Self::read_be(s.work1, s.lt + 2, w);
            std::mem::swap(&mut s.work1, &mut s.work2);
            s.lt = bitlen(t_old);
            s.lrp = bitlen(r_old);
        }
        if s.ls == 0 {
            s.phase1 = !s.phase1;
            s.phase2 = !s.phase2;
        }
        if s.lq == 0 && s.lrp > 0 {
            s.sign ^= s.phase2;
            s.phase2 ^= s.sign ^ s.phase1;
        }
        if s.phase1 {
            // Un-post-shift.
            if s.phase2 {
                s.work2 = s.rot_left(s.work2, 2);
                s.ls += 2;
            }
            s.work2 = s.rot_right(s.work2, 1);
            s.ls -= 1;
            // Un-block-3.
            let width = s.block3_width();
            let t = s.work1 & mask(s.lt + 1);
            let tp = s.work2 & mask(width);
            let borrow = tp < t;
            let diff = tp.wrapping_sub(t) & mask(width);
            s.work2 = (s.work2 & !mask(width)) | diff;
            s.sign ^= borrow;
            s.sign = !s.sign;
            if s.phase2 || !s.sign {
                let tp = s.work2 & mask(width);
                let sum = (tp + t) & mask(width);
                s.work2 = (s.work2 & !mask(width)) | sum;
            }
        }
        if s.phase1 != s.phase2 {
            if s.phase1 {
                s.lq += 1;
            }
            let pos = s.lt + s.lq + 1;
            let bit = Self::bit(s.work1, pos);
            if bit != s.sign {
                s.work1 ^= 1 << (pos - 1);
            }
            s.sign = bit;
            if !s.phase1 {
                s.lq -= 1;
            }
        }
        if !s.phase1 {
            if let Some((a, b)) = s.block1_window() {
                let m = b - a + 1;
                if !s.phase2 || !s.sign {
                    let u = Self::read_be(s.work1, a, b);
                    let v = Self::read_be(s.work2, a, b);
                    let diff = u.wrapping_sub(v) & mask(m);
                    Self::write_be(&mut s.work1, a, b, diff);
                }
                if s.phase2 {
                    s.sign = !s.sign;
                }
                let carried = s.add_window_w1(a, b);
                s.sign ^= carried;
            } else if s.phase2 {
                s.sign = !s.sign;
            }
            // Un-pre-shift.
            if s.phase2 {
                s.work2 = s.rot_left(s.work2, 2);
                s.ls += 2;
            }
            s.work2 = s.rot_right(s.work2, 1);
            s.ls -= 1;
        }
        s
    }
}

/// Quotient-sequence view of an instance: the classical EEA bookkeeping
/// behind the step count N = 4 * sum(bitlen(q_i) + 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EeaTrace {
    pub quotients: Vec<u64>,
    /// Iteration index k with r_{k-1} = 1, r_k = 0.
    pub k: u32,
    pub active_steps: u32,
}

impl EeaTrace {
    pub fn of(inst: &ProblemInstance) -> EeaTrace {
        let flip = 2 * inst.x > inst.p;
        let xp = if flip { inst.p - inst.x } else { inst.x };
        let mut r_prev = inst.p;
        let mut r = xp;
        let mut quotients = Vec::new();
        while r != 0 {
            quotients.push(r_prev / r);
            let rem = r_prev % r;
            r_prev = r;
            r = rem;
        }
        debug_assert_eq!(r_prev, 1, "p prime implies gcd 1");
        let k = quotients.len() as u32 + 1;
        let active_steps: u32 = quotients.iter().map(|&q| 4 * (bitlen(q))).sum();
        EeaTrace {
            quotients,
            k,
            active_steps,
        }
    }

    /// Rebuild the remainder sequence from the quotients; strictly
    /// decreasing down to r_{k-1} = 1, r_k = 0.
    pub fn reconstruct_remainders(&self, p: u64) -> Vec<u64> {
        let mut pair = (1u64, 0u64); // (r_i, r_{i+1}) walking backwards
        let mut rs = vec![0u64, 1];
        for &q in self.quotients.iter().rev() {
            pair = (q * pair.0 + pair.1, pair.0);
            rs.push(pair.0);
        }
        rs.reverse();
        debug_assert_eq!(rs[0], p);
        rs
    }
}

pub fn fib(i: u32) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..i {
        let c = a + b;
        a = b;
        b = c;
    }
    a
}

/// Nominal schedule length 4*ceil(c*n) with c = 1/log2(golden ratio),
/// computed exactly (see [`crate::exact`]). This is the published bound; it
/// is what the resource model and by-size synthesis use.
pub fn total_steps(n: u32) -> u32 {
    4 * crate::exact::ceil_c_times(n)
}

/// Active steps for the pair (p, x') without the flip or primality checks:
/// 4 * sum(bitlen(q_i)) over the quotient sequence of gcd(p, x').
pub fn steps_for_pair(p: u64, x: u64) -> u32 {
    let mut r_prev = p;
    let mut r = x;
    let mut steps = 0;
    while r != 0 {
        steps += 4 * bitlen(r_prev / r);
        let rem = r_prev % r;
        r_prev = r;
        r = rem;
    }
    steps
}

/// Exact worst case of the active step count over every input of a given
/// modulus. The nominal 4*ceil(c*n) bound is not sound for quotient
/// sequences dominated by runs of 2s (silver-ratio growth beats the
/// Fibonacci argument), so per-prime schedules take the max with this.
pub fn max_active_steps(p: u64) -> u32 {
    (1..=p / 2).map(|x| steps_for_pair(p, x)).max().unwrap_or(0)
}

/// Schedule actually used for circuits and runs of a concrete modulus:
/// long enough for every input.
pub fn schedule_steps(p: u64) -> u32 {
    let n = bitlen(p);
    total_steps(n).max(max_active_steps(p))
}

/// Step count at which lrp first becomes 0 (the quotient-sum formula),
/// also validated against the step machine in tests.
pub fn active_step_count(inst: &ProblemInstance) -> u32 {
    EeaTrace::of(inst).active_steps
}

/// Run the full inversion: init, schedule_steps(p) steps, read the output,
/// then undo the steps and check the initial state is restored exactly.
pub fn run_inversion(inst: &ProblemInstance) -> u64 {
    let init = MachineState::init(inst);
    let total = schedule_steps(inst.p);
    let mut s = init;
    for _ in 0..total {
        s = s.step();
    }
    debug_assert_eq!(s.lrp, 0, "schedule long enough to terminate");
    let d = s.decode();
    let out = if s.iter {
        d.t_prime
    } else {
        inst.p - d.t_prime
    };
    let mut back = s;
    for _ in 0..total {
        back = back.step_inverse();
    }
    assert_eq!(back, init, "inverse steps must restore the initial state");
    debug_assert_eq!(out % inst.p * inst.x % inst.p, 1 % inst.p);
    out
}

/// Extended-gcd oracle, independent of the step machine.
pub fn mod_inverse_oracle(p: u64, x: u64) -> u64 {
    let (mut old_r, mut r) = (p as i128, x as i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_t, t) = (t, old_t - q * t);
    }
    debug_assert_eq!(old_r, 1);
    (old_t.rem_euclid(p as i128)) as u64
}

/// One row of the execution trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepTrace {
    pub step: u32,
    pub work1: String,
    pub work2: String,
    pub t: u64,
    pub q: u64,
    pub r: u64,
    pub t_prime: u64,
    pub r_prime: u64,
    pub lt: u32,
    pub lq: u32,
    pub lrp: u32,
    pub ls: u32,
    pub phase1: u8,
    pub phase2: u8,
    pub iter: u8,
    pub sign: u8,
}

pub const TRACE_HEADER: &str =
    "step\twork1\twork2\tt\tq\tr\tt_prime\tr_prime\tlt\tlq\tlrp\tls\tphase1\tphase2\titer\tsign";

impl StepTrace {
    /// Annotations (the `|` field separators) are derived purely from the
    /// length registers. Terminated states render as the literal string
    /// the reference table prints.
    pub fn of(step: u32, s: &MachineState) -> StepTrace {
        let d = s.decode();
        let (w1, w2) = if s.lrp == 0 {
            ("Terminated".to_string(), "Terminated".to_string())
        } else {
            (render_work1(s), render_work2(s))
        };
        StepTrace {
            step,
            work1: w1,
            work2: w2,
            t: d.t,
            q: d.q,
            r: d.r,
            t_prime: d.t_prime,
            r_prime: d.r_prime,
            lt: s.lt,
            lq: s.lq,
            lrp: s.lrp,
            ls: s.ls,
            phase1: s.phase1 as u8,
            phase2: s.phase2 as u8,
            iter: s.iter as u8,
            sign: s.sign as u8,
        }
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.step,
            self.work1,
            self.work2,
            self.t,
            self.q,
            self.r,
            self.t_prime,
            self.r_prime,
            self.lt,
            self.lq,
            self.lrp,
            self.ls,
            self.phase1,
            self.phase2,
            self.iter,
            self.sign
        )
    }
}

fn bits_of(v: u64, first: u32, last: u32) -> String {
    (first..=last)
        .map(|pos| if (v >> (pos - 1)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn render_work1(s: &MachineState) -> String {
    let w = s.width();
    let t = bits_of(s.work1, 1, s.lt + 1);
    let q = if s.lq == 0 {
        String::new()
    } else {
        bits_of(s.work1, s.lt + 2, s.lt + s.lq + 1)
    };
    let r = bits_of(s.work1, s.lt + s.lq + 2, w);
    format!("{t}|{q}|{r}")
}

fn render_work2(s: &MachineState) -> String {
    let w = s.width();
    let se = s.ls % w;
    debug_assert!(s.lrp + se <= w, "r' field may not wrap while active");
    let f_first = w + 1 - s.lrp - se;
    let f_last = w - se;
    let pre = if f_first > 1 {
        bits_of(s.work2, 1, f_first - 1)
    } else {
        String::new()
    };
    let field = bits_of(s.work2, f_first, f_last);
    let post = if f_last < w {
        bits_of(s.work2, f_last + 1, w)
    } else {
        String::new()
    };
    format!("{pre}|{field}|{post}")
}

/// Trace rows 0..=schedule_steps(p).
pub fn classical_trace(inst: &ProblemInstance) -> Vec<StepTrace> {
    let total = schedule_steps(inst.p);
    let mut s = MachineState::init(inst);
    let mut rows = Vec::with_capacity(total as usize + 1);
    rows.push(StepTrace::of(0, &s));
    for t in 1..=total {
        s = s.step();
        rows.push(StepTrace::of(t, &s));
    }
    rows
}

pub fn trace_tsv(rows: &[StepTrace]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.tsv_row());
        out.push('\n');
    }
    out
}

/// Operand positions a step actually exercises, for window-soundness
/// instrumentation against the step-dependent active windows.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowUsage {
    /// Block 1 (r arithmetic): dynamic window [lo, hi], if the block fires
    /// with a nonempty window.
    pub r_ops: Option<(u32, u32)>,
    /// Block 2 swap position lt+lq+1 (post-growth), if the block fires.
    pub swap_pos: Option<u32>,
    /// Block 3 top position lt+1, if the block fires.
    pub t_top: Option<u32>,
    /// Phase-4 t-arithmetic: the full t'-field top n+3-ls-lrp.
    pub t_top_wide: Option<u32>,
    /// Length-update scans at an iteration boundary: (lt_old, n+3-lrp_old)
    /// for the lt-update and (lt_new+2, n+4-lrp_new) for the lrp-update
    /// (the second component of len_rp is n+3 at termination).
    pub len_t: Option<(u32, u32)>,
    pub len_rp: Option<(u32, u32)>,
}

/// Inspect which positions the step from `s` touches.
pub fn window_usage(s: &MachineState) -> WindowUsage {
    let mut u = WindowUsage::default();
    let cur = *s;
    let w = cur.width();
    if !cur.phase1 {
        let mut ls = cur.ls + 1;
        if cur.phase2 {
            ls -= 2;
        }
        let a = cur.lt + cur.lq + 2;
        let b = w as i64 - ls as i64;
        if (a as i64) <= b {
            u.r_ops = Some((a, b as u32));
        }
    }
    if cur.phase1 != cur.phase2 {
        let lq = if cur.phase1 { cur.lq } else { cur.lq + 1 };
        u.swap_pos = Some(cur.lt + lq + 1);
    }
    if cur.phase1 {
        u.t_top = Some(cur.lt + 1);
        if cur.phase2 {
            u.t_top_wide = Some(w - cur.ls - cur.lrp);
        }
    }
    let next = cur.step();
    if next.lq == 0 && next.ls == 0 {
        // Boundary fired during this step.
        u.len_t = Some((cur.lt, w - cur.lrp.max(1)));
        u.len_rp = Some((
            next.lt + 2,
            if next.lrp == 0 { w } else { w + 1 - next.lrp },
        ));
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(p: u64, x: u64) -> ProblemInstance {
        ProblemInstance::new(p, x).unwrap()
    }

    #[test]
    fn init_matches_table_row_zero() {
        let s = MachineState::init(&inst(37, 13));
        assert_eq!(render_work1(&s), "10||0100101");
        assert_eq!(render_work2(&s), "00000|1101|");
        assert_eq!((s.lt, s.lq, s.lrp, s.ls), (1, 0, 4, 0));
        assert!(!s.phase1 && !s.phase2 && !s.sign && !s.iter);
    }

    #[test]
    fn init_flips_large_x() {
        let s = MachineState::init(&inst(37, 25));
        assert!(s.iter);
        assert_eq!(s.decode().r_prime, 12);
        assert_eq!(s.lrp, 4);
    }

    #[test]
    fn init_rejects_bad_inputs() {
        assert_eq!(
            ProblemInstance::new(37, 0).unwrap_err(),
            ModelError::XOutOfRange { p: 37, x: 0 }
        );
        assert!(ProblemInstance::new(37, 37).is_err());
        assert_eq!(
            ProblemInstance::new(35, 2).unwrap_err(),
            ModelError::NotPrime(35)
        );
        assert_eq!(
            ProblemInstance::new(3, 2).unwrap_err(),
            ModelError::TooSmall(3)
        );
    }

    #[test]
    fn step_rows_zero_one_two() {
        let mut s = MachineState::init(&inst(37, 13));
        s = s.step();
        assert_eq!(render_work2(&s), "0000|1101|0");
        assert_eq!(s.ls, 1);
        s = s.step();
        assert_eq!(render_work2(&s), "000|1101|00");
        assert!(s.phase2 && !s.phase1);
    }

    #[test]
    fn step_row_seven_to_eight_boundary() {
        let mut s = MachineState::init(&inst(37, 13));
        for _ in 0..8 {
            s = s.step();
        }
        let d = s.decode();
        assert_eq!((d.t, d.r, d.t_prime, d.r_prime), (2, 13, 1, 11));
        assert_eq!(s.lt, 2);
        assert!(s.iter);
        assert_eq!(render_work1(&s), "010||001101");
        assert_eq!(render_work2(&s), "10000|1011|");
    }

    #[test]
    fn step_row_31_to_32_termination() {
        let mut s = MachineState::init(&inst(37, 13));
        for _ in 0..32 {
            s = s.step();
        }
        assert_eq!(s.lrp, 0);
        let d = s.decode();
        assert_eq!((d.t, d.r, d.t_prime), (37, 1, 17));
        assert_eq!(s.lt, 6);
        assert!(!s.iter);
    }

    #[test]
    fn padding_only_bumps_ls() {
        let mut s = MachineState::init(&inst(37, 13));
        for _ in 0..32 {
            s = s.step();
        }
        let d32 = s.decode();
        for extra in 1..=4u32 {
            s = s.step();
            assert_eq!(s.ls, extra);
            let d = s.decode();
            assert_eq!((d.t, d.t_prime), (d32.t, d32.t_prime));
            assert!(!s.phase1 && !s.phase2);
        }
    }

    #[test]
    fn step_inverse_roundtrip_all_rows_p37() {
        for x in 1..37 {
            let mut s = MachineState::init(&inst(37, x));
            for t in 0..total_steps(6) {
                let next = s.step();
                assert_eq!(next.step_inverse(), s, "x={x} t={t}");
                assert_eq!(s.step_inverse().step(), s, "fwd(inv) x={x} t={t}");
                s = next;
            }
        }
    }

    #[test]
    fn boundary_identity_holds() {
        for x in 1..101u64 {
            let mut s = MachineState::init(&inst(101, x));
            for _ in 0..total_steps(7) {
                if s.is_iteration_boundary() && s.lrp > 0 {
                    let d = s.decode();
                    assert_eq!(d.t * d.r + d.t_prime * d.r_prime, 101, "x={x}");
                }
                s = s.step();
            }
        }
    }

    #[test]
    fn run_inversion_examples() {
        assert_eq!(run_inversion(&inst(37, 13)), 20);
        assert_eq!(run_inversion(&inst(7, 3)), 5);
        for p in [5u64, 7, 11, 37, 101] {
            assert_eq!(run_inversion(&inst(p, 1)), 1);
        }
    }

    #[test]
    fn active_step_counts() {
        assert_eq!(active_step_count(&inst(37, 13)), 32);
        assert_eq!(active_step_count(&inst(37, 1)), 24);
        // Exhaustive sweep over x for p = 37: bounds and the max value.
        let mut max = 0;
        for x in 1..37 {
            let n = active_step_count(&inst(37, x));
            assert!(n >= 24 && n <= total_steps(6), "x={x} N={n}");
            // N equals the first step with lrp = 0 on the machine.
            let mut s = MachineState::init(&inst(37, x));
            let mut first = 0;
            for t in 1..=total_steps(6) {
                s = s.step();
                if s.lrp == 0 {
                    first = t;
                    break;
                }
            }
            assert_eq!(first, n, "x={x}");
            max = max.max(n);
        }
        // The worst case over x at p = 37 is 32, strictly below the nominal
        // bound 4*ceil(6c) = 36 (no input attains it at this modulus).
        assert_eq!(max, 32);
        assert_eq!(total_steps(6), 36);
        assert_eq!(schedule_steps(37), 36);
    }

    #[test]
    fn nominal_step_bound_has_counterexamples() {
        // Runs of quotient 2 grow r by the silver ratio per 8 steps, which
        // beats the Fibonacci worst-case argument: the 4*ceil(c*n) bound is
        // not sound for these inputs, and the per-prime schedule covers them.
        assert_eq!(steps_for_pair(433, 179), 56);
        assert!(56 > total_steps(9));
        assert!(schedule_steps(433) >= 56);
        assert_eq!(steps_for_pair(8191, 3394), 80);
        assert!(80 > total_steps(13));
        // The machine terminates exactly at the widened schedule.
        let mut s = MachineState::init(&inst(433, 179));
        let mut first = 0;
        for t in 1..=schedule_steps(433) {
            s = s.step();
            if s.lrp == 0 && first == 0 {
                first = t;
            }
        }
        assert_eq!(first, 56);
        assert_eq!(run_inversion(&inst(433, 179)), mod_inverse_oracle(433, 179));
    }

    #[test]
    fn quotient_trace_reconstruction() {
        let tr = EeaTrace::of(&inst(37, 13));
        assert_eq!(tr.quotients, vec![2, 1, 5, 2]);
        assert_eq!(tr.k, 5);
        assert_eq!(tr.active_steps, 32);
        let rs = tr.reconstruct_remainders(37);
        assert_eq!(rs, vec![37, 13, 11, 2, 1, 0]);
        assert!(rs.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn boundary_t_floor() {
        // The literal floor t >= F_{T/4+1} fails: at (101, 37) the machine
        // reaches the boundary after 24 steps with t = 11 < F_7 = 13
        // (quotient-2 runs again). A corrected floor F_{T/8+2} does hold;
        // both facts are pinned here.
        let mut s = MachineState::init(&inst(101, 37));
        for _ in 0..24 {
            s = s.step();
        }
        assert!(s.is_iteration_boundary());
        assert_eq!(s.decode().t, 11);
        assert!(11 < fib(24 / 4 + 1));

        for p in [37u64, 101, 127, 433] {
            for x in 1..p {
                let mut st = MachineState::init(&inst(p, x));
                for t in 1..=schedule_steps(p) {
                    st = st.step();
                    if st.is_iteration_boundary() && st.lrp > 0 {
                        assert_eq!(t % 4, 0);
                        let dt = st.decode().t;
                        assert!(dt >= fib(t / 8 + 2), "p={p} x={x} t={t} dt={dt}");
                    }
                }
            }
        }
    }

    #[test]
    fn inversion_matches_oracle_small_primes() {
        for p in [5u64, 7, 11, 13, 17, 19, 23, 101, 127] {
            for x in 1..p {
                let got = run_inversion(&inst(p, x));
                assert_eq!(got, mod_inverse_oracle(p, x), "p={p} x={x}");
                assert_eq!(got * x % p, 1);
            }
        }
    }

    #[test]
    fn trace_row_samples_p37() {
        let rows = classical_trace(&inst(37, 13));
        let r4 = &rows[4];
        assert_eq!(r4.work1, "10|10|01011");
        assert_eq!((r4.t, r4.q, r4.r, r4.lq, r4.phase1), (1, 2, 11, 2, 1));
        let r24 = &rows[24];
        assert_eq!(
            (
                r24.t,
                r24.q,
                r24.r,
                r24.t_prime,
                r24.r_prime,
                r24.lt,
                r24.iter
            ),
            (17, 0, 2, 3, 1, 5, 1)
        );
        let r36 = &rows[36];
        assert_eq!((r36.ls, r36.lrp), (4, 0));
        assert_eq!(r36.work1, "Terminated");
    }

    #[test]
    fn trace_is_fixed_length() {
        for x in [1u64, 13, 25, 36] {
            assert_eq!(classical_trace(&inst(37, x)).len(), 37);
        }
    }
}
