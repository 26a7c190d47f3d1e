//! Command-line surface: synthesis, simulation, verification, tracing,
//! counting and resource estimation for the reversible modular-inversion
//! circuits.

use clap::{Args, Parser, Subcommand, ValueEnum};
use revinv::ir::{BitState, Circuit, CountSink};
use revinv::model::{
    self, classical_trace, is_odd_prime, mod_inverse_oracle, trace_tsv, ProblemInstance, StepTrace,
};
use revinv::synth::{active_windows, simulate_inversion, SynthTarget, Synthesizer};
use revinv::{estimate, exact};
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "revinv",
    about = "Reversible modular-inversion circuits: synthesis, simulation, verification and resource estimation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Tsv,
}

#[derive(Args)]
struct TargetArgs {
    /// Odd prime modulus (simulable; schedule covers every input).
    #[arg(long, conflicts_with = "n")]
    prime: Option<u64>,
    /// Register size only (resource counting; nominal schedule).
    #[arg(long)]
    n: Option<u32>,
}

impl TargetArgs {
    fn resolve(&self) -> Result<SynthTarget, String> {
        match (self.prime, self.n) {
            (Some(p), None) => {
                if !is_odd_prime(p) {
                    return Err(format!("{p} is not an odd prime"));
                }
                if model::bitlen(p) < 3 {
                    return Err(format!("modulus {p} too small (need at least 3 bits)"));
                }
                Ok(SynthTarget::Modulus(p))
            }
            (None, Some(n)) => {
                if n < 3 {
                    return Err(format!("n = {n} too small (need n >= 3)"));
                }
                Ok(SynthTarget::Size(n))
            }
            _ => Err("exactly one of --prime or --n is required".into()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the full inversion circuit and its manifest.
    Synth {
        #[command(flatten)]
        target: TargetArgs,
        /// Circuit output path (text format; "-" for stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Manifest output path (JSON: layout, schedule, window table).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Apply a serialized circuit to a basis state.
    Simulate {
        /// Circuit file (text format).
        #[arg(long)]
        circuit: PathBuf,
        /// Input bit string, wire 0 first.
        #[arg(long)]
        input: String,
    },
    /// Check the synthesized inversion circuit against the extended-gcd
    /// oracle by classical simulation.
    Verify {
        /// Odd prime modulus.
        #[arg(long)]
        prime: u64,
        /// Verify every input in [1, p-1].
        #[arg(long)]
        all: bool,
        /// Verify a single input.
        #[arg(long, conflicts_with = "all")]
        x: Option<u64>,
        /// Also cross-check every step against the reference machine.
        #[arg(long)]
        oracle: bool,
        /// Allow exhaustive verification beyond the default p < 2^13 cap.
        #[arg(long)]
        force_large: bool,
    },
    /// Emit the step-by-step execution trace as TSV.
    Trace {
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        x: u64,
        /// Trace the reference machine (default).
        #[arg(long)]
        model: bool,
        /// Trace by simulating the step circuits and decoding each state.
        #[arg(long, conflicts_with = "model")]
        circuit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference-machine trace (alias of trace --model).
    ModelTrace {
        #[arg(long)]
        prime: u64,
        #[arg(long)]
        x: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream the lowered inversion circuit through the gate counter.
    Count {
        #[command(flatten)]
        target: TargetArgs,
        /// Include the per-block breakdown.
        #[arg(long)]
        per_block: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Closed-form width and gate-count estimates.
    Estimate {
        /// Register size; omit for the full comparison table.
        #[arg(long)]
        n: Option<u32>,
        /// Include the ECDLP roll-up.
        #[arg(long)]
        ecdlp: bool,
        /// Signed-window size (default 2*log2 n).
        #[arg(long)]
        windows: Option<u32>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Synth {
            target,
            out,
            manifest,
            format,
        } => {
            let target = target.resolve()?;
            let synth = Synthesizer::new(target);
            let circuit = synth.inversion_circuit();
            let body = match format {
                Format::Text => circuit.serialize_text().map_err(|e| e.to_string())?,
                Format::Json => {
                    serde_json::to_string_pretty(&circuit).map_err(|e| e.to_string())?
                }
                Format::Tsv => return Err("circuit output supports text or json".into()),
            };
            match &out {
                Some(p) if p.as_os_str() != "-" => fs::write(p, body).map_err(|e| e.to_string())?,
                _ => print!("{body}"),
            }
            let man = manifest_json(&synth);
            if let Some(p) = manifest {
                fs::write(
                    &p,
                    serde_json::to_string_pretty(&man).map_err(|e| e.to_string())?,
                )
                .map_err(|e| e.to_string())?;
            }
            eprintln!(
                "synthesized n={} width={} (+{} output) steps={} gates={}",
                synth.layout.n,
                synth.layout.inversion_width(),
                synth.layout.n,
                synth.schedule.total_steps,
                circuit.gates.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { circuit, input } => {
            let text = fs::read_to_string(&circuit).map_err(|e| e.to_string())?;
            let c = Circuit::parse_text(&text).map_err(|e| e.to_string())?;
            let bits = BitState::from_str_bits(input.trim()).map_err(|e| e.to_string())?;
            let out = c.apply(&bits).map_err(|e| e.to_string())?;
            println!("{}", out.to_bit_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            prime,
            all,
            x,
            oracle,
            force_large,
        } => verify(prime, all, x, oracle, force_large),
        Command::Trace {
            prime,
            x,
            model: _,
            circuit,
            out,
        } => {
            let inst = ProblemInstance::new(prime, x).map_err(|e| e.to_string())?;
            let rows = if circuit {
                circuit_trace(&inst)?
            } else {
                classical_trace(&inst)
            };
            let tsv = trace_tsv(&rows);
            match out {
                Some(p) => fs::write(&p, tsv).map_err(|e| e.to_string())?,
                None => print!("{tsv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ModelTrace { prime, x, out } => {
            let inst = ProblemInstance::new(prime, x).map_err(|e| e.to_string())?;
            let tsv = trace_tsv(&classical_trace(&inst));
            match out {
                Some(p) => fs::write(&p, tsv).map_err(|e| e.to_string())?,
                None => print!("{tsv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Count {
            target,
            per_block,
            format,
        } => {
            let target = target.resolve()?;
            let synth = Synthesizer::new(target);
            let mut sink = if per_block {
                CountSink::with_blocks()
            } else {
                CountSink::new()
            };
            synth.emit_inversion(&mut sink);
            let report = sink.into_report(synth.layout.total_width());
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
                ),
                Format::Tsv => {
                    println!("block\ttoffoli\tcnot\tx");
                    println!("total\t{}\t{}\t{}", report.toffoli, report.cnot, report.x);
                    for (name, c) in &report.per_block {
                        println!("{name}\t{}\t{}\t{}", c.toffoli, c.cnot, c.x);
                    }
                }
                Format::Text => {
                    println!(
                        "n={} width={} toffoli={} cnot={} x={}",
                        synth.layout.n, report.width, report.toffoli, report.cnot, report.x
                    );
                    if per_block {
                        let mut rows: Vec<_> = report.per_block.iter().collect();
                        rows.sort_by_key(|(_, c)| std::cmp::Reverse(c.toffoli));
                        for (name, c) in rows {
                            println!(
                                "  {name:<14} toffoli={:<12} cnot={:<12} x={}",
                                c.toffoli, c.cnot, c.x
                            );
                        }
                        let sum: u64 = report.per_block.iter().map(|(_, c)| c.toffoli).sum();
                        println!("  (per-block toffoli sum = {sum})");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate {
            n,
            ecdlp,
            windows,
            format,
        } => estimate_cmd(n, ecdlp, windows, format),
    }
}

fn manifest_json(synth: &Synthesizer) -> serde_json::Value {
    let windows: Vec<_> = (1..=synth.schedule.total_steps)
        .map(|t| active_windows(synth.layout.n, t))
        .collect();
    json!({
        "n": synth.layout.n,
        "modulus": match synth.target { SynthTarget::Modulus(p) => Some(p), _ => None },
        "total_steps": synth.schedule.total_steps,
        "nominal_steps": synth.schedule.nominal_steps,
        "inversion_width": synth.layout.inversion_width(),
        "total_width": synth.layout.total_width(),
        "layout": synth.layout,
        "windows": windows,
    })
}

fn verify(
    prime: u64,
    all: bool,
    x: Option<u64>,
    oracle: bool,
    force_large: bool,
) -> Result<ExitCode, String> {
    if !is_odd_prime(prime) {
        return Err(format!("{prime} is not an odd prime"));
    }
    if model::bitlen(prime) < 3 {
        return Err(format!("modulus {prime} too small"));
    }
    if all && prime >= 1 << 13 && !force_large {
        return Err(
            "exhaustive verification capped at p < 2^13 (pass --force-large to override)".into(),
        );
    }
    let synth = Synthesizer::new(SynthTarget::Modulus(prime));
    let circuit = synth.inversion_circuit();
    let xs: Vec<u64> = if all {
        (1..prime).collect()
    } else {
        vec![x.ok_or("pass --x VALUE or --all")?]
    };
    let mut pass = 0u64;
    let mut fail = 0u64;
    for &xi in &xs {
        if xi == 0 || xi >= prime {
            return Err(format!("x = {xi} out of range"));
        }
        let (result, outbits) = simulate_inversion(&synth, &circuit, xi);
        let want = mod_inverse_oracle(prime, xi);
        let mut ok = result == want;
        // Input preserved and all auxiliaries clean.
        for (i, &wire) in synth.layout.input.iter().enumerate() {
            ok &= outbits.get(wire) == (xi >> i & 1 == 1);
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
                ok &= !outbits.get(w);
            }
        }
        if ok && oracle {
            ok &= oracle_lockstep(&synth, prime, xi);
        }
        if ok {
            pass += 1;
            if !all {
                println!("x={xi}: output {result} ok ({xi}*{result} = 1 mod {prime})");
            }
        } else {
            fail += 1;
            println!("x={xi}: FAIL (got {result}, want {want})");
        }
    }
    println!("p={prime}: {pass}/{} pass", xs.len());
    if fail == 0 {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

fn oracle_lockstep(synth: &Synthesizer, prime: u64, x: u64) -> bool {
    let inst = match ProblemInstance::new(prime, x) {
        Ok(i) => i,
        Err(_) => return false,
    };
    let mut s = model::MachineState::init(&inst);
    let mut bits = BitState::zeros(synth.layout.total_width() as usize);
    synth.encode_state(&s, &mut bits);
    for t in 1..=synth.schedule.total_steps {
        let c = synth.step_circuit(t);
        bits = match c.apply(&bits) {
            Ok(b) => b,
            Err(_) => return false,
        };
        s = s.step();
        if synth.decode_state(&bits) != s {
            return false;
        }
    }
    true
}

fn circuit_trace(inst: &ProblemInstance) -> Result<Vec<StepTrace>, String> {
    let synth = Synthesizer::new(SynthTarget::Modulus(inst.p));
    let mut bits = BitState::zeros(synth.layout.total_width() as usize);
    let s0 = model::MachineState::init(inst);
    synth.encode_state(&s0, &mut bits);
    let mut rows = vec![StepTrace::of(0, &synth.decode_state(&bits))];
    for t in 1..=synth.schedule.total_steps {
        let c = synth.step_circuit(t);
        bits = c.apply(&bits).map_err(|e| e.to_string())?;
        rows.push(StepTrace::of(t, &synth.decode_state(&bits)));
    }
    Ok(rows)
}

fn estimate_cmd(
    n: Option<u32>,
    ecdlp: bool,
    windows: Option<u32>,
    format: Format,
) -> Result<ExitCode, String> {
    match n {
        Some(n) => {
            if n < 8 {
                return Err("estimates need n >= 8".into());
            }
            let w = windows.unwrap_or_else(|| estimate::default_window(n));
            if w < 1 {
                return Err("window size must be >= 1".into());
            }
            let inv_width = estimate::inversion_width(n);
            let tof = estimate::inversion_toffoli_leading(n);
            let cnot = estimate::inversion_cnot_leading(n);
            let breakdown = estimate::per_block_breakdown(n);
            let totals = if ecdlp {
                Some(estimate::ecdlp_totals(n, w))
            } else {
                None
            };
            match format {
                Format::Json => {
                    let v = json!({
                        "n": n,
                        "inversion_width": {"value": inv_width, "provenance": "model"},
                        "toffoli_leading": {"value": tof, "provenance": "model"},
                        "cnot_leading": {"value": cnot, "provenance": "model"},
                        "per_block": breakdown,
                        "ecdlp": totals,
                    });
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?
                    );
                }
                _ => {
                    println!("n = {n}");
                    println!(
                        "inversion width   = {inv_width} qubits  [model: 3n + 4 floor(log2 n) + 20]"
                    );
                    println!("toffoli leading   = {tof:.3e}  [model: 2(80c-13) n^2 log2 n]");
                    println!("cnot leading      = {cnot:.3e}  [model: half the toffoli term]");
                    for b in &breakdown {
                        println!(
                            "  {:<10} coeff {}c{}{} = {:>8.3}   toffoli {:.3e}",
                            b.block,
                            b.coeff_c,
                            if b.coeff_const >= 0 { "+" } else { "-" },
                            b.coeff_const.abs(),
                            b.coeff_value,
                            b.toffoli_leading
                        );
                    }
                    if let Some(t) = &totals {
                        println!(
                            "ecdlp width       = {} qubits  [model: 5n + 4 floor(log2 n) + 21]",
                            t.qubits
                        );
                        println!(
                            "point addition    = {:.3e} toffoli (coeff {} on n^2 log2 n)",
                            t.point_addition_toffoli,
                            estimate::point_addition_coeff()
                        );
                        println!(
                            "windows           = {} of size {} (lookup overhead {:.1e}/window, excluded)",
                            t.window_count, t.window_size, t.lookup_overhead_per_window
                        );
                        println!("ecdlp toffoli     = {:.3e} total", t.total_toffoli);
                    }
                    println!("c = {:.12} (1/log2 golden ratio)", exact::C_APPROX);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        None => {
            let rows = estimate::table_report(&estimate::default_report_sizes());
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?
                ),
                Format::Tsv => {
                    println!("n\tinv_width\tecdlp_width\ttoffoli_leading\tcnot_leading\tref_toffoli_1e8\tref_cnot_1e8\tref_ecdlp_qubits");
                    for r in rows {
                        println!(
                            "{}\t{}\t{}\t{:.4e}\t{:.4e}\t{}\t{}\t{}",
                            r.n,
                            r.inversion_width,
                            r.ecdlp_width,
                            r.toffoli_leading,
                            r.cnot_leading,
                            r.reference_toffoli_1e8
                                .map_or("-".into(), |v| v.to_string()),
                            r.reference_cnot_1e8.map_or("-".into(), |v| v.to_string()),
                            r.reference_ecdlp_qubits
                                .map_or("-".into(), |v| v.to_string()),
                        );
                    }
                }
                Format::Text => {
                    println!(
                        "{:<6} {:>10} {:>12} {:>14} {:>14} {:>10} {:>10}",
                        "n",
                        "inv_width",
                        "ecdlp_width",
                        "toffoli_lead",
                        "cnot_lead",
                        "ref_tof",
                        "ref_cnot"
                    );
                    for r in rows {
                        println!(
                            "{:<6} {:>10} {:>12} {:>14.3e} {:>14.3e} {:>10} {:>10}",
                            r.n,
                            r.inversion_width,
                            r.ecdlp_width,
                            r.toffoli_leading,
                            r.cnot_leading,
                            r.reference_toffoli_1e8
                                .map_or("-".into(), |v| format!("{v}e8")),
                            r.reference_cnot_1e8
                                .map_or("-".into(), |v| format!("{v}e8")),
                        );
                    }
                    println!("comparator widths (prior constructions, reference only):");
                    for (name, f) in estimate::COMPARATOR_WIDTHS {
                        println!("  {name}: {f}");
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
