//! Batch command-line front end: load theory/channel/instance files, run the
//! library operations, emit tables.
//!
//! Exit codes: 0 on success or a passing verdict, 1 on a failing verdict,
//! 2 on usage errors or malformed input files.

use std::collections::HashMap;
use std::fs;
use std::process::ExitCode;
use std::sync::Arc;

use gptlab::channel::Channel;
use gptlab::channel::{identity_channel, make_channel, measure_and_prepare, permutation_channel};
use gptlab::distinguish::find_distinguishing_observable;
use gptlab::fidelity::fidelity;
use gptlab::json::{format_float, space_from_json, space_to_json, GameRow, InstanceFile};
use gptlab::lp::Tolerances;
use gptlab::polygon::{polygon_theory_with_tol, run_game};
use gptlab::programming::{
    build_channel_programmer, build_reversible_programmer, no_programming_audit, verify_program,
};
use gptlab::space::{simplex_with_tol, Observable, State, StateSpace};
use gptlab::structure::{
    enumerate_quasiclassical_decompositions, equivalence_decomposition, quasiclassical_witness,
    Partition, QuasiClassicalStructure,
};

const USAGE: &str = "\
gptlab <command> [flags]

commands:
  polygon                 --sides M [--out FILE]
  simplex                 --size N [--out FILE]
  distinguish             --theory FILE --states I,J[,..]
  fidelity                --theory FILE --a I --b J
  decompose               --theory FILE
  qc-find                 --theory FILE --max-degree K
  program-build-reversible --system SPEC --apparatus SPEC --blocks I,J|K,L
                           --dynamics D|D [--out FILE]
  program-build-channel   --system SPEC --apparatus SPEC --programs I,J[,..]
                           --dynamics D|D[|D..] [--reprepare I,J,..] [--out FILE]
  program-verify          --instance FILE
  audit                   --instance FILE
  game                    --sides M --system N [--format tsv|json]
  sweep-game              --sides-from A --sides-to B [--system N] [--format tsv|json]

SPEC is simplex:N, polygon:M, or a theory JSON path. Dynamics D is one of
id, perm:2,0,1 (simplex systems), rot:K, refl:K (polygon systems), const:J.
Global flags: --tol EPS (or env GPTLAB_TOL) overrides the comparison slack;
--seed S is accepted for reproducibility bookkeeping; --format tsv|json.
";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Verdict(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

enum CliError {
    Usage(String),
    /// Malformed files or invalid domain data; exits 2.
    Input(String),
    /// A well-posed run with a negative outcome; exits 1.
    Verdict(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }
}

struct Config {
    tol: Tolerances,
    format: String,
    #[allow(dead_code)]
    seed: u64,
    out: Option<String>,
}

fn run(args: &[String]) -> Result<ExitCode, CliError> {
    let Some(command) = args.first() else {
        return Err(CliError::usage("missing command"));
    };
    let flags = parse_flags(&args[1..])?;
    let config = Config::from_flags(&flags)?;
    match command.as_str() {
        "polygon" => cmd_polygon(&flags, &config),
        "simplex" => cmd_simplex(&flags, &config),
        "distinguish" => cmd_distinguish(&flags, &config),
        "fidelity" => cmd_fidelity(&flags, &config),
        "decompose" => cmd_decompose(&flags, &config),
        "qc-find" => cmd_qc_find(&flags, &config),
        "program-build-reversible" => cmd_build_reversible(&flags, &config),
        "program-build-channel" => cmd_build_channel(&flags, &config),
        "program-verify" => cmd_program_verify(&flags, &config),
        "audit" => cmd_audit(&flags, &config),
        "game" => cmd_game(&flags, &config),
        "sweep-game" => cmd_sweep_game(&flags, &config),
        other => Err(CliError::usage(format!("unknown command `{other}`"))),
    }
}

fn parse_flags(args: &[String]) -> Result<HashMap<String, String>, CliError> {
    let mut flags = HashMap::new();
    let mut it = args.iter();
    while let Some(key) = it.next() {
        let Some(name) = key.strip_prefix("--") else {
            return Err(CliError::usage(format!("expected a --flag, got `{key}`")));
        };
        let Some(value) = it.next() else {
            return Err(CliError::usage(format!("flag --{name} needs a value")));
        };
        flags.insert(name.to_string(), value.clone());
    }
    Ok(flags)
}

impl Config {
    fn from_flags(flags: &HashMap<String, String>) -> Result<Self, CliError> {
        let mut tol = Tolerances::default();
        let env_tol = std::env::var("GPTLAB_TOL").ok();
        let tol_text = flags.get("tol").cloned().or(env_tol);
        if let Some(t) = tol_text {
            let eps: f64 = t
                .parse()
                .map_err(|_| CliError::usage(format!("--tol `{t}` is not a number")))?;
            tol = tol
                .with_eps_eq(eps)
                .map_err(|e| CliError::usage(e.to_string()))?;
        }
        let format = flags.get("format").cloned().unwrap_or_else(|| "tsv".into());
        if format != "tsv" && format != "json" {
            return Err(CliError::usage(format!(
                "--format `{format}` is not tsv|json"
            )));
        }
        let seed = match flags.get("seed") {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::usage(format!("--seed `{s}` is not an integer")))?,
            None => 0,
        };
        Ok(Config {
            tol,
            format,
            seed,
            out: flags.get("out").cloned(),
        })
    }
}

fn need<'a>(flags: &'a HashMap<String, String>, key: &str) -> Result<&'a str, CliError> {
    flags
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::usage(format!("missing --{key}")))
}

fn parse_usize(text: &str, what: &str) -> Result<usize, CliError> {
    text.parse()
        .map_err(|_| CliError::usage(format!("{what} `{text}` is not a nonnegative integer")))
}

fn parse_index_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| parse_usize(t.trim(), what))
        .collect()
}

fn emit(config: &Config, text: &str) -> Result<(), CliError> {
    match &config.out {
        Some(path) => fs::write(path, text).map_err(CliError::input),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Loads simplex:N, polygon:M, or a theory JSON file.
fn load_space(spec: &str, tol: Tolerances) -> Result<(Arc<StateSpace>, SpaceKind), CliError> {
    if let Some(n) = spec.strip_prefix("simplex:") {
        let n = parse_usize(n, "simplex size")?;
        let space = simplex_with_tol(n, tol).map_err(CliError::input)?;
        return Ok((Arc::new(space), SpaceKind::Simplex));
    }
    if let Some(m) = spec.strip_prefix("polygon:") {
        let m = parse_usize(m, "polygon sides")?;
        let pt = polygon_theory_with_tol(m, tol).map_err(CliError::input)?;
        return Ok((pt.space().clone(), SpaceKind::Polygon(m)));
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::input(format!("cannot read `{spec}`: {e}")))?;
    let space = space_from_json(&text, tol).map_err(CliError::input)?;
    Ok((Arc::new(space), SpaceKind::Other))
}

#[derive(Clone, Copy, PartialEq)]
enum SpaceKind {
    Simplex,
    Polygon(usize),
    Other,
}

/// Parses a dynamics spec against the system space.
fn load_dynamics(
    spec: &str,
    system: &Arc<StateSpace>,
    kind: SpaceKind,
) -> Result<Channel, CliError> {
    if spec == "id" {
        return Ok(identity_channel(system));
    }
    if let Some(perm) = spec.strip_prefix("perm:") {
        if !system.is_simplex() {
            return Err(CliError::usage("perm: dynamics need a simplex system"));
        }
        let perm = parse_index_list(perm, "permutation entry")?;
        if perm.len() != system.dim() {
            return Err(CliError::usage(format!(
                "permutation has {} entries, system has {}",
                perm.len(),
                system.dim()
            )));
        }
        return permutation_channel(system, &perm).map_err(CliError::input);
    }
    if let Some(k) = spec
        .strip_prefix("rot:")
        .or_else(|| spec.strip_prefix("refl:"))
    {
        let SpaceKind::Polygon(m) = kind else {
            return Err(CliError::usage("rot:/refl: dynamics need a polygon system"));
        };
        let k = parse_usize(k, "dihedral index")?;
        let pt = polygon_theory_with_tol(m, *system.tolerances()).map_err(CliError::input)?;
        let c = if spec.starts_with("rot:") {
            gptlab::polygon::rotation_channel(&pt, k)
        } else {
            gptlab::polygon::reflection_channel(&pt, k)
        };
        // Rebuild against the caller's space handle.
        return make_channel(c.matrix().clone(), system, system).map_err(CliError::input);
    }
    if let Some(j) = spec.strip_prefix("const:") {
        let j = parse_usize(j, "target vertex")?;
        if j >= system.num_extreme() {
            return Err(CliError::usage(format!("const: vertex {j} out of range")));
        }
        let unit = gptlab::space::validate_observable(system, vec![system.unit_effect().to_vec()])
            .map_err(CliError::input)?;
        return measure_and_prepare(&unit, &[system.extreme_state(j)], system, system)
            .map_err(CliError::input);
    }
    Err(CliError::usage(format!("unknown dynamics spec `{spec}`")))
}

fn observable_lines(obs: &Observable) -> String {
    obs.effects()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let coords: Vec<String> = e.coords().iter().map(|v| format_float(*v)).collect();
            format!("effect {i}\t{}", coords.join("\t"))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn cmd_polygon(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let sides = parse_usize(need(flags, "sides")?, "--sides")?;
    let pt = polygon_theory_with_tol(sides, config.tol).map_err(CliError::input)?;
    emit(config, &space_to_json(pt.space()))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_simplex(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let size = parse_usize(need(flags, "size")?, "--size")?;
    let space = simplex_with_tol(size, config.tol).map_err(CliError::input)?;
    emit(config, &space_to_json(&space))?;
    Ok(ExitCode::SUCCESS)
}

fn load_states(space: &Arc<StateSpace>, indices: &[usize]) -> Result<Vec<State>, CliError> {
    indices
        .iter()
        .map(|&i| {
            if i >= space.num_extreme() {
                Err(CliError::usage(format!(
                    "state index {i} out of range ({} extreme points)",
                    space.num_extreme()
                )))
            } else {
                Ok(space.extreme_state(i))
            }
        })
        .collect()
}

fn cmd_distinguish(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let (space, _) = load_space(need(flags, "theory")?, config.tol)?;
    let indices = parse_index_list(need(flags, "states")?, "--states")?;
    let states = load_states(&space, &indices)?;
    let out = find_distinguishing_observable(&space, &states).map_err(CliError::input)?;
    match out.observable() {
        Some(obs) => {
            println!("DISTINGUISHABLE");
            println!("{}", observable_lines(obs));
            Ok(ExitCode::SUCCESS)
        }
        None => Err(CliError::Verdict("NOT_DISTINGUISHABLE".into())),
    }
}

fn cmd_fidelity(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let (space, _) = load_space(need(flags, "theory")?, config.tol)?;
    let a = parse_usize(need(flags, "a")?, "--a")?;
    let b = parse_usize(need(flags, "b")?, "--b")?;
    let states = load_states(&space, &[a, b])?;
    let f = fidelity(&space, &states[0], &states[1]).map_err(CliError::input)?;
    if config.format == "json" {
        println!(
            "{}",
            serde_json::json!({
                "value": f.value,
                "certified_zero": f.certified_zero,
                "exact": f.exact,
            })
        );
    } else {
        println!(
            "fidelity\t{}\tcertified_zero\t{}\texact\t{}",
            format_float(f.value),
            f.certified_zero,
            f.exact
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_decompose(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let (space, _) = load_space(need(flags, "theory")?, config.tol)?;
    let partition = equivalence_decomposition(&space);
    if config.format == "json" {
        println!(
            "{}",
            serde_json::to_string(&gptlab::json::PartitionFile::from_partition(&partition))
                .expect("serializable")
        );
    } else {
        for (i, block) in partition.blocks().iter().enumerate() {
            let ids: Vec<String> = block.iter().map(usize::to_string).collect();
            println!("class {i}\t{}", ids.join(","));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_qc_find(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let (space, _) = load_space(need(flags, "theory")?, config.tol)?;
    let max_degree = parse_usize(need(flags, "max-degree")?, "--max-degree")?;
    let found =
        enumerate_quasiclassical_decompositions(&space, max_degree).map_err(CliError::input)?;
    println!("decompositions\t{}", found.len());
    for (i, s) in found.iter().enumerate() {
        let blocks: Vec<String> = s
            .partition
            .blocks()
            .iter()
            .map(|b| b.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect();
        println!(
            "decomposition {i}\tdegree {}\t{}",
            s.degree(),
            blocks.join("|")
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_blocks(text: &str) -> Result<Vec<Vec<usize>>, CliError> {
    text.split('|')
        .map(|b| parse_index_list(b, "block entry"))
        .collect()
}

fn cmd_build_reversible(
    flags: &HashMap<String, String>,
    config: &Config,
) -> Result<ExitCode, CliError> {
    let (system, system_kind) = load_space(need(flags, "system")?, config.tol)?;
    let (apparatus, _) = load_space(need(flags, "apparatus")?, config.tol)?;
    let blocks = parse_blocks(need(flags, "blocks")?)?;
    let partition = Partition::new(apparatus.clone(), blocks).map_err(CliError::input)?;
    let witness = quasiclassical_witness(&partition)
        .map_err(CliError::input)?
        .ok_or_else(|| CliError::Verdict("NO_WITNESS for the requested blocks".into()))?;
    let qc = QuasiClassicalStructure { partition, witness };
    let dynamics: Vec<Channel> = need(flags, "dynamics")?
        .split('|')
        .map(|d| load_dynamics(d, &system, system_kind))
        .collect::<Result<_, _>>()?;
    let assignment: Vec<usize> = (0..qc.partition.degree()).collect();
    let inst = build_reversible_programmer(&system, &qc, &dynamics, &assignment)
        .map_err(|e| CliError::Verdict(format!("BUILD_FAILED: {e}")))?;
    let file = InstanceFile::from_instance(&inst).map_err(CliError::input)?;
    emit(
        config,
        &serde_json::to_string_pretty(&file).expect("serializable"),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_build_channel(
    flags: &HashMap<String, String>,
    config: &Config,
) -> Result<ExitCode, CliError> {
    let (system, system_kind) = load_space(need(flags, "system")?, config.tol)?;
    let (apparatus, _) = load_space(need(flags, "apparatus")?, config.tol)?;
    let program_idx = parse_index_list(need(flags, "programs")?, "--programs")?;
    let programs = load_states(&apparatus, &program_idx)?;
    let obs = find_distinguishing_observable(&apparatus, &programs)
        .map_err(CliError::input)?
        .observable()
        .cloned()
        .ok_or_else(|| {
            CliError::Verdict("PROGRAMS_NOT_DISTINGUISHABLE: constructor refuses".into())
        })?;
    let dynamics: Vec<Channel> = need(flags, "dynamics")?
        .split('|')
        .map(|d| load_dynamics(d, &system, system_kind))
        .collect::<Result<_, _>>()?;
    let reprepared = match flags.get("reprepare") {
        Some(list) => load_states(&apparatus, &parse_index_list(list, "--reprepare")?)?,
        None => programs.clone(),
    };
    let inst =
        build_channel_programmer(&system, &apparatus, &programs, &obs, &dynamics, &reprepared)
            .map_err(|e| CliError::Verdict(format!("BUILD_FAILED: {e}")))?;
    let file = InstanceFile::from_instance(&inst).map_err(CliError::input)?;
    emit(
        config,
        &serde_json::to_string_pretty(&file).expect("serializable"),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn load_instance(
    flags: &HashMap<String, String>,
    config: &Config,
) -> Result<gptlab::programming::ProgrammingInstance, CliError> {
    let path = need(flags, "instance")?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read `{path}`: {e}")))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(CliError::input)?;
    file.into_instance(config.tol).map_err(CliError::input)
}

fn cmd_program_verify(
    flags: &HashMap<String, String>,
    config: &Config,
) -> Result<ExitCode, CliError> {
    let inst = load_instance(flags, config)?;
    let mut all = true;
    for i in 0..inst.programs().len() {
        let ok = verify_program(&inst, i).map_err(CliError::input)?;
        println!("program {i}\t{}", if ok { "OK" } else { "VIOLATED" });
        all &= ok;
    }
    if all {
        println!("verdict\tPASS");
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Verdict("verdict\tFAIL".into()))
    }
}

fn cmd_audit(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let inst = load_instance(flags, config)?;
    let report = no_programming_audit(&inst).map_err(CliError::input)?;
    for pair in &report.pairs {
        println!(
            "pair {} {}\tdynamics_differ {}\tdistinguishable {}\t{}",
            pair.a,
            pair.b,
            pair.dynamics_differ,
            pair.programs_distinguishable,
            if pair.ok() { "OK" } else { "VIOLATION" }
        );
    }
    if report.passed {
        println!("verdict\tPASS");
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Verdict("verdict\tFAIL".into()))
    }
}

fn game_row(sides: usize, system: usize) -> Result<GameRow, CliError> {
    let report = run_game(system, sides).map_err(CliError::input)?;
    Ok(GameRow::from_report(&report))
}

fn cmd_game(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let sides = parse_usize(need(flags, "sides")?, "--sides")?;
    let system = parse_usize(need(flags, "system")?, "--system")?;
    let row = game_row(sides, system)?;
    if config.format == "json" {
        println!("{}", serde_json::to_string(&row).expect("serializable"));
    } else {
        println!("{}", GameRow::TSV_HEADER);
        println!("{}", row.tsv_row());
    }
    if row.verdict == "PASS" {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Verdict("verdict\tFAIL".into()))
    }
}

fn cmd_sweep_game(flags: &HashMap<String, String>, config: &Config) -> Result<ExitCode, CliError> {
    let from = parse_usize(need(flags, "sides-from")?, "--sides-from")?;
    let to = parse_usize(need(flags, "sides-to")?, "--sides-to")?;
    if from < 3 || to < from {
        return Err(CliError::usage("need 3 <= sides-from <= sides-to"));
    }
    let system_override = match flags.get("system") {
        Some(s) => Some(parse_usize(s, "--system")?),
        None => None,
    };
    // One job per M; results collected in order for deterministic output.
    let rows: Vec<Result<GameRow, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (from..=to)
            .map(|m| {
                let system = system_override.unwrap_or(m).max(m);
                scope.spawn(move || game_row(m, system))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("job"))
            .collect()
    });
    let mut all_pass = true;
    let mut out_rows = Vec::new();
    for row in rows {
        let row = row?;
        all_pass &= row.verdict == "PASS";
        out_rows.push(row);
    }
    if config.format == "json" {
        println!(
            "{}",
            serde_json::to_string(&out_rows).expect("serializable")
        );
    } else {
        println!("{}", GameRow::TSV_HEADER);
        for row in &out_rows {
            println!("{}", row.tsv_row());
        }
    }
    if all_pass {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Verdict("verdict\tFAIL".into()))
    }
}
