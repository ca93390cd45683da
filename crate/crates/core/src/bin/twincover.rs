//! Command-line front end: encode system specs, validate bundles, run the
//! property suites, simulate decoded trajectories and export graphs.
//!
//! Exit codes: 0 all checks pass, 1 axiom/property failure, 2 parse
//! error, 3 refinement cap exceeded, 4 usage error.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use twincover::encoder::{
    conjugacy_check, decode_psi, encode, encode_zero_dim, verify_conditions, EncodeError,
    Encoding,
};
use twincover::graph_core::{relation_image, Graph, Vertex};
use twincover::limit_engine::GraphSequence;
use twincover::systems::{self, rat, OpenSet, System};
use twincover::twinned_engine::TwinnedSequence;
use twincover::Thread;

const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_USAGE: u8 = 4;

#[derive(Parser)]
#[command(name = "twincover", version, about = "Encode, validate and simulate compact dynamical systems as inverse sequences of twinned graph homomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Twinned,
    ZeroDim,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format for the report
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the primary artifact here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every axiom of a bundle (encoder bundle, twinned sequence or
    /// graph sequence), one PASS/FAIL line per axiom per level
    Validate {
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Encode a system spec to the given depth and write the bundle
    Encode {
        input: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long, value_enum, default_value = "twinned")]
        mode: Mode,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Decode and step a sampled class trajectory through an encoder bundle
    Simulate {
        input: PathBuf,
        /// Number of steps (each step drops one level)
        #[arg(long)]
        steps: usize,
        /// Starting depth (default: deepest level)
        #[arg(long)]
        at: Option<usize>,
        /// Start from this vertex id at the starting depth
        #[arg(long)]
        start: Option<String>,
        /// Start from a vertex whose set contains this point (a point
        /// name, a rational, or a word depending on the backend)
        #[arg(long)]
        contains: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the aggregated property suite on a bundle
    Check {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Depth cap for the exhaustive continuity/saturation checks
        #[arg(long)]
        cap: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Export one level as DOT (G solid, F dashed) or a JSON slice
    Export {
        input: PathBuf,
        #[arg(long)]
        level: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind::*;
            let _ = e.print();
            return match e.kind() {
                DisplayHelp | DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

fn err(code: u8, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Validate { input, output } => cmd_validate(&input, &output),
        Command::Encode {
            input,
            depth,
            mode,
            output,
        } => cmd_encode(&input, depth, mode, &output),
        Command::Simulate {
            input,
            steps,
            at,
            start,
            contains,
            output,
        } => cmd_simulate(&input, steps, at, start, contains, &output),
        Command::Check {
            input,
            seed,
            samples,
            cap,
            output,
        } => cmd_check(&input, seed, samples, cap, &output),
        Command::Export {
            input,
            level,
            output,
        } => cmd_export(&input, level, &output),
    }
}

/// Anything the file-based commands accept.
enum Bundle {
    Encoding(Box<Encoding>),
    Twinned(Box<TwinnedSequence>),
    Sequence(Box<GraphSequence>),
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| err(EXIT_PARSE, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| err(EXIT_PARSE, format!("{} is not valid JSON: {e}", path.display())))
}

fn load_bundle(path: &PathBuf) -> Result<Bundle, CliError> {
    let value = read_json(path)?;
    let keys: BTreeSet<&str> = value
        .as_object()
        .map(|o| o.keys().map(|k| k.as_str()).collect())
        .unwrap_or_default();
    let name = path.display();
    if keys.contains("system") && keys.contains("vertex_table") {
        let e: Encoding = serde_json::from_value(value)
            .map_err(|e| err(EXIT_PARSE, format!("{name}: bad encoder bundle: {e}")))?;
        Ok(Bundle::Encoding(Box::new(e)))
    } else if keys.contains("g_levels") {
        let t: TwinnedSequence = serde_json::from_value(value)
            .map_err(|e| err(EXIT_PARSE, format!("{name}: bad twinned sequence: {e}")))?;
        Ok(Bundle::Twinned(Box::new(t)))
    } else if keys.contains("levels") && keys.contains("bonding") {
        let s: GraphSequence = serde_json::from_value(value)
            .map_err(|e| err(EXIT_PARSE, format!("{name}: bad graph sequence: {e}")))?;
        Ok(Bundle::Sequence(Box::new(s)))
    } else {
        Err(err(
            EXIT_PARSE,
            format!("{name}: not an encoder bundle, twinned sequence or graph sequence"),
        ))
    }
}

fn load_system(path: &PathBuf) -> Result<System, CliError> {
    let value = read_json(path)?;
    serde_json::from_value(value)
        .map_err(|e| err(EXIT_PARSE, format!("{}: bad system spec: {e}", path.display())))
}

fn emit(output: &OutputArgs, text: String) -> Result<(), CliError> {
    match &output.out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| err(EXIT_USAGE, format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// One PASS/FAIL line of a report.
#[derive(serde::Serialize)]
struct Line {
    check: String,
    level: Option<usize>,
    pass: bool,
    witness: Option<String>,
}

fn line(check: impl Into<String>, level: Option<usize>, witness: Option<String>) -> Line {
    Line {
        check: check.into(),
        level,
        pass: witness.is_none(),
        witness,
    }
}

fn render(lines: &[Line], header: &str, output: &OutputArgs) -> Result<u8, CliError> {
    let all_pass = lines.iter().all(|l| l.pass);
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "report": header,
            "lines": lines,
            "pass": all_pass,
        }))
        .expect("serializable"),
        _ => {
            let mut s = format!("# {header} (twincover {})\n", env!("CARGO_PKG_VERSION"));
            for l in lines {
                let at = match l.level {
                    Some(i) => format!(" level {i}"),
                    None => String::new(),
                };
                let verdict = if l.pass { "PASS" } else { "FAIL" };
                s.push_str(&format!("{verdict} {}{at}", l.check));
                if let Some(w) = &l.witness {
                    s.push_str(&format!(": {w}"));
                }
                s.push('\n');
            }
            s.push_str(if all_pass { "all checks passed" } else { "FAILURES present" });
            s
        }
    };
    emit(output, text)?;
    Ok(if all_pass { 0 } else { EXIT_FAIL })
}

fn twinned_axiom_lines(ts: &TwinnedSequence) -> Vec<Line> {
    let violations = ts.validate();
    let mut lines = Vec::new();
    let mut push = |axiom: &str, level: usize| {
        let witness = violations
            .iter()
            .find(|v| v.axiom.to_string() == axiom && v.level == level)
            .map(|v| v.witness.clone());
        lines.push(line(axiom, Some(level), witness));
    };
    push("DS0", 0);
    for i in 0..=ts.max_depth() {
        push("DS1", i);
        push("DS2", i);
        if i >= 1 {
            push("DS3", i);
            push("DS3b", i);
        }
    }
    lines
}

fn condition_lines(enc: &Encoding) -> Vec<Line> {
    let violations = verify_conditions(enc.system(), enc.levels());
    let mut lines = Vec::new();
    let mut push = |cond: &str, level: usize| {
        let witness = violations
            .iter()
            .find(|v| v.condition.to_string() == cond && v.level == level)
            .map(|v| v.detail.clone());
        lines.push(line(cond, Some(level), witness));
    };
    push("C1", 0);
    for i in 0..enc.levels().len() {
        push("epsilon", i);
        if i >= 1 {
            push("C2", i);
            push("C3", i);
            push("C5", i);
        }
    }
    lines
}

fn sequence_lines(seq: &GraphSequence) -> Vec<Line> {
    let violations = seq.validate();
    (0..=seq.max_depth())
        .map(|i| {
            let witness = violations
                .iter()
                .find(|v| v.level == i)
                .map(|v| v.description.clone());
            line(format!("{:?}", seq.kind()).to_lowercase(), Some(i), witness)
        })
        .collect()
}

fn cmd_validate(input: &PathBuf, output: &OutputArgs) -> Result<u8, CliError> {
    let (header, lines) = match load_bundle(input)? {
        Bundle::Encoding(enc) => {
            let mut lines = twinned_axiom_lines(enc.twinned());
            lines.extend(condition_lines(&enc));
            ("encoder bundle validation", lines)
        }
        Bundle::Twinned(ts) => ("twinned sequence validation", twinned_axiom_lines(&ts)),
        Bundle::Sequence(seq) => ("graph sequence validation", sequence_lines(&seq)),
    };
    render(&lines, header, output)
}

fn cmd_encode(
    input: &PathBuf,
    depth: usize,
    mode: Mode,
    output: &OutputArgs,
) -> Result<u8, CliError> {
    let sys = load_system(input)?;
    let mut report = format!(
        "# encode depth {depth} (twincover {})\n",
        env!("CARGO_PKG_VERSION")
    );
    let bundle_json = match mode {
        Mode::Twinned => {
            let enc = encode(&sys, depth).map_err(encode_error)?;
            for (i, level) in enc.levels().iter().enumerate() {
                let g = &enc.twinned().g_levels()[i];
                let f = &enc.twinned().f_levels()[i];
                report.push_str(&format!(
                    "level {i}: {} vertices, {} G-edges, {} F-edges, epsilon = {}\n",
                    g.vertices().len(),
                    g.edges().len(),
                    f.edges().len(),
                    rat::format_rat(&level.epsilon)
                ));
            }
            serde_json::to_string_pretty(&enc).expect("serializable")
        }
        Mode::ZeroDim => {
            let seq = encode_zero_dim(&sys, depth).map_err(encode_error)?;
            for (i, g) in seq.levels().iter().enumerate() {
                report.push_str(&format!(
                    "level {i}: {} vertices, {} edges\n",
                    g.vertices().len(),
                    g.edges().len()
                ));
            }
            serde_json::to_string_pretty(&seq).expect("serializable")
        }
    };
    match &output.out {
        Some(p) => {
            std::fs::write(p, bundle_json)
                .map_err(|e| err(EXIT_USAGE, format!("cannot write {}: {e}", p.display())))?;
            report.push_str(&format!("bundle written to {}", p.display()));
            println!("{report}");
        }
        None => match output.format {
            Format::Json => println!("{bundle_json}"),
            _ => print!("{report}"),
        },
    }
    Ok(0)
}

fn encode_error(e: EncodeError) -> CliError {
    match &e {
        EncodeError::RefinementCapExceeded { .. } => err(EXIT_CAP, e.to_string()),
        EncodeError::WrongBackend(_) => err(EXIT_USAGE, e.to_string()),
        _ => err(EXIT_FAIL, e.to_string()),
    }
}

fn display_set(set: &OpenSet) -> String {
    match set {
        OpenSet::Finite { points } => {
            format!("{{{}}}", points.iter().cloned().collect::<Vec<_>>().join(", "))
        }
        OpenSet::Interval { intervals } => {
            if intervals.is_empty() {
                return "∅".into();
            }
            intervals
                .intervals()
                .iter()
                .map(|iv| {
                    format!(
                        "{}{}, {}{}",
                        if iv.lo_closed { "[" } else { "(" },
                        rat::format_rat(&iv.lo),
                        rat::format_rat(&iv.hi),
                        if iv.hi_closed { "]" } else { ")" }
                    )
                })
                .collect::<Vec<_>>()
                .join(" ∪ ")
        }
        OpenSet::Cylinders { words } => {
            if words.is_empty() {
                return "∅".into();
            }
            words
                .words()
                .iter()
                .map(|w| format!("[{}]", w.join("")))
                .collect::<Vec<_>>()
                .join(" ∪ ")
        }
    }
}

/// Resolves `--contains` to a vertex at the given depth.
fn find_containing_vertex(
    enc: &Encoding,
    depth: usize,
    point: &str,
) -> Result<Vertex, CliError> {
    let contains = |set: &OpenSet| -> bool {
        match (enc.system(), set) {
            (System::Finite(_), OpenSet::Finite { points }) => points.contains(point),
            (System::PlInterval(_), OpenSet::Interval { intervals }) => {
                match rat::parse_rat(point) {
                    Ok(x) => intervals.contains_point(&x),
                    Err(_) => false,
                }
            }
            (System::Shift(_), OpenSet::Cylinders { words }) => {
                let symbols: Vec<String> = if point.contains('|') {
                    point.split('|').map(str::to_string).collect()
                } else {
                    point.chars().map(|c| c.to_string()).collect()
                };
                words
                    .words()
                    .iter()
                    .any(|w| w.len() <= symbols.len() && symbols[..w.len()] == w[..])
            }
            _ => false,
        }
    };
    for t in &enc.vertex_table()[depth] {
        if let Some(set) = enc.underlying_set(depth, &t.id) {
            if contains(set) {
                return Ok(t.id.clone());
            }
        }
    }
    Err(err(
        EXIT_USAGE,
        format!("no level-{depth} vertex contains {point}"),
    ))
}

fn cmd_simulate(
    input: &PathBuf,
    steps: usize,
    at: Option<usize>,
    start: Option<String>,
    contains: Option<String>,
    output: &OutputArgs,
) -> Result<u8, CliError> {
    let Bundle::Encoding(enc) = load_bundle(input)? else {
        return Err(err(EXIT_USAGE, "simulate needs an encoder bundle"));
    };
    let ts = enc.twinned();
    let depth = at.unwrap_or(enc.max_depth());
    if depth > enc.max_depth() {
        return Err(err(
            EXIT_USAGE,
            format!("starting depth {depth} exceeds bundle depth {}", enc.max_depth()),
        ));
    }
    if steps > depth {
        return Err(err(
            EXIT_USAGE,
            format!("{steps} steps exceed starting depth {depth} (each step drops one level)"),
        ));
    }
    let start_vertex = match (start, contains) {
        (Some(v), _) => {
            if ts.thread(depth, &v).is_err() {
                return Err(err(EXIT_USAGE, format!("{v} is not a level-{depth} vertex")));
            }
            v
        }
        (None, Some(p)) => find_containing_vertex(&enc, depth, &p)?,
        (None, None) => {
            return Err(err(EXIT_USAGE, "simulate needs --start or --contains"));
        }
    };

    // class approximant: the raw F-neighbourhood of the start vertex;
    // each step maps members to the prefixes of their successors
    let raw = ts
        .f_relation_at_depth(depth)
        .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
    let mut members = relation_image(&raw, &start_vertex)
        .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
    members.insert(start_vertex.clone());

    let mut steps_out = Vec::new();
    let mut d = depth;
    for step in 0..=steps {
        let mut enclosure: Option<OpenSet> = None;
        for id in &members {
            let t = Thread {
                depth: d,
                last: id.clone(),
            };
            let e = decode_psi(&enc, &t).map_err(|e| err(EXIT_FAIL, e.to_string()))?;
            enclosure = Some(match enclosure {
                None => e,
                Some(a) => systems::union(enc.system(), &a, &e)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?,
            });
        }
        let enclosure = enclosure.expect("class is nonempty");
        let diam = systems::diam(enc.system(), &enclosure)
            .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
        steps_out.push(json!({
            "step": step,
            "depth": d,
            "class_members": members,
            "enclosure": enclosure,
            "enclosure_display": display_set(&enclosure),
            "diameter": rat::format_rat(&diam),
        }));
        if step == steps {
            break;
        }
        let phi = ts.bonding(d);
        let mut next: BTreeSet<Vertex> = BTreeSet::new();
        for y in &members {
            for w in ts.g_levels()[d].out_neighbors(y) {
                next.insert(phi.apply(w).clone());
            }
        }
        members = next;
        d -= 1;
    }

    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "start": start_vertex,
            "start_depth": depth,
            "steps": steps_out,
        }))
        .expect("serializable"),
        _ => {
            let mut s = format!(
                "# simulate from {start_vertex} at depth {depth} (twincover {})\n",
                env!("CARGO_PKG_VERSION")
            );
            for o in &steps_out {
                s.push_str(&format!(
                    "step {} (depth {}): {} members, enclosure {} (diameter {})\n",
                    o["step"],
                    o["depth"],
                    o["class_members"].as_array().map(|a| a.len()).unwrap_or(0),
                    o["enclosure_display"].as_str().unwrap_or(""),
                    o["diameter"].as_str().unwrap_or("")
                ));
            }
            s
        }
    };
    emit(output, text)?;
    Ok(0)
}

fn cmd_check(
    input: &PathBuf,
    seed: u64,
    samples: usize,
    cap: Option<usize>,
    output: &OutputArgs,
) -> Result<u8, CliError> {
    let mut lines = Vec::new();
    match load_bundle(input)? {
        Bundle::Encoding(enc) => {
            let ts = enc.twinned();
            let cap = cap.unwrap_or(enc.max_depth().min(3));
            lines.push(line(
                "axioms",
                None,
                ts.validate().first().map(|v| v.to_string()),
            ));
            lines.push(line(
                "conditions",
                None,
                verify_conditions(enc.system(), enc.levels())
                    .first()
                    .map(|v| v.to_string()),
            ));
            lines.push(line(
                "graph-consistency",
                None,
                twincover::encoder::recheck_graphs(&enc)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?,
            ));
            if cap >= 1 {
                let w = ts
                    .continuity_check_exhaustive(cap - 1, cap)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    "continuity",
                    Some(cap),
                    w.map(|(t, w)| {
                        format!(
                            "thread {} fails at level {}: successor {} of {}",
                            t.last, w.level, w.successor, w.source
                        )
                    }),
                ));
                let s = ts
                    .saturation_check_exhaustive(0, cap)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    "saturation",
                    Some(cap),
                    s.map(|t| format!("thread {} is not saturated", t.last)),
                ));
            }
            for n in 1..=enc.max_depth() {
                let w = ts
                    .raw_chain_projection_witness(n)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    "chain-projection",
                    Some(n),
                    w.map(|(x, y, z)| format!("chain {x} ~ {y} ~ {z} does not project")),
                ));
            }
            if enc.max_depth() >= 1 {
                let report = conjugacy_check(&enc, enc.max_depth(), samples, seed)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    format!(
                        "conjugacy (seed {seed}, {} samples)",
                        report.samples.len()
                    ),
                    Some(enc.max_depth()),
                    if report.passed() {
                        None
                    } else {
                        Some(format!("{} of {} samples failed", report.failures, report.samples.len()))
                    },
                ));
            }
        }
        Bundle::Twinned(ts) => {
            let cap = cap.unwrap_or(ts.max_depth().min(3));
            lines.push(line(
                "axioms",
                None,
                ts.validate().first().map(|v| v.to_string()),
            ));
            if cap >= 1 {
                let w = ts
                    .continuity_check_exhaustive(cap - 1, cap)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    "continuity",
                    Some(cap),
                    w.map(|(t, w)| {
                        format!(
                            "thread {} fails at level {}: successor {} of {}",
                            t.last, w.level, w.successor, w.source
                        )
                    }),
                ));
            }
        }
        Bundle::Sequence(seq) => {
            lines.push(line(
                "axioms",
                None,
                seq.validate().first().map(|v| v.to_string()),
            ));
            for n in 1..=seq.max_depth() {
                let mut witness = None;
                match seq.enumerate_threads(n) {
                    Ok(threads) => {
                        for t in threads {
                            if let Err(e) = seq.cover_successor(&t) {
                                witness = Some(e.to_string());
                                break;
                            }
                        }
                    }
                    Err(e) => witness = Some(e.to_string()),
                }
                lines.push(line("determinism", Some(n), witness));
                let surj = seq
                    .surjectivity_at_depth(n)
                    .map_err(|e| err(EXIT_FAIL, e.to_string()))?;
                lines.push(line(
                    "surjectivity",
                    Some(n),
                    if surj {
                        None
                    } else {
                        Some("some thread has no extension from above".into())
                    },
                ));
            }
        }
    }
    render(&lines, "property suite", output)
}

fn dot_twinned(g: &Graph, f: &Graph) -> String {
    let mut out = String::from("digraph level {\n");
    for v in g.vertices() {
        out.push_str(&format!("  \"{v}\";\n"));
    }
    for (u, v) in g.edges() {
        out.push_str(&format!("  \"{u}\" -> \"{v}\";\n"));
    }
    // symmetric F-edges once per unordered pair, dashed and undirected
    for (u, v) in f.edges() {
        if u <= v {
            out.push_str(&format!("  \"{u}\" -> \"{v}\" [style=dashed, dir=none];\n"));
        }
    }
    out.push_str("}\n");
    out
}

fn cmd_export(input: &PathBuf, level: usize, output: &OutputArgs) -> Result<u8, CliError> {
    let bundle = load_bundle(input)?;
    let max = match &bundle {
        Bundle::Encoding(e) => e.max_depth(),
        Bundle::Twinned(t) => t.max_depth(),
        Bundle::Sequence(s) => s.max_depth(),
    };
    if level > max {
        return Err(err(
            EXIT_USAGE,
            format!("level {level} out of range 0..={max}"),
        ));
    }
    let text = match (&bundle, output.format) {
        (Bundle::Encoding(e), Format::Json) => {
            let ts = e.twinned();
            serde_json::to_string_pretty(&json!({
                "g": ts.g_levels()[level],
                "f": ts.f_levels()[level],
            }))
            .expect("serializable")
        }
        (Bundle::Encoding(e), _) => {
            dot_twinned(&e.twinned().g_levels()[level], &e.twinned().f_levels()[level])
        }
        (Bundle::Twinned(t), Format::Json) => serde_json::to_string_pretty(&json!({
            "g": t.g_levels()[level],
            "f": t.f_levels()[level],
        }))
        .expect("serializable"),
        (Bundle::Twinned(t), _) => dot_twinned(&t.g_levels()[level], &t.f_levels()[level]),
        (Bundle::Sequence(s), Format::Json) => {
            serde_json::to_string_pretty(&s.levels()[level]).expect("serializable")
        }
        (Bundle::Sequence(s), _) => s.levels()[level].to_dot(),
    };
    emit(output, text)?;
    Ok(0)
}
