use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rado_core::ambient::{
    constructive_witness, least_orbit_member, monochromatic_copy_greedy, orbit_copy, orbit_member, verify_copy,
    MAX_PATTERN_DEPTH,
};
use rado_core::copies::{back_and_forth, extendible_base, split_extendible, PartialIso, Schedule, SharedIso};
use rado_core::fusion::{
    branch_from_real, decided_membership, fuse, read_off, slalom, total_decision_counterexample, FusionJson,
    FusionResult, OracleSpec,
};
use rado_core::labeling::{label, Labeling};
use rado_core::orbits::{intersect, is_suborbit, orbits_equal};
use rado_core::ramsey::{export_subtree_dot, find_strong_subtree, truncate_tree, unsplit, FiniteReversedTree};
use rado_core::treeorder::{downset_orbit, export_dot, immediate_predecessors, vertex};
use rado_core::{adjacent, CopyHandle, FinSet, OrbitType, TreeNode, Vertex, VertexPredicate};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{Config, Format, Overrides, SEARCH_BOUND_ENV};
use crate::{Cli, CliError, Command, CopyArgs, CopyCmd, IsoArgs, OrbitCmd, ScheduleArg, TreeCmd};

type Out<'a> = &'a mut dyn Write;

fn io(e: std::io::Error) -> CliError {
    CliError::Usage(format!("write failed: {e}"))
}

fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("bad {what} {text:?}: {e}")))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad {what} in {}: {e}", path.display())))
}

#[derive(serde::Deserialize)]
struct RawOrbit {
    #[serde(rename = "H")]
    h: FinSet,
    #[serde(rename = "K")]
    k: FinSet,
}

/// A shape error is a usage error; `K ⊄ H` is a precondition violation.
fn parse_orbit(text: &str) -> Result<OrbitType, CliError> {
    let raw: RawOrbit = parse_json(text, "orbit")?;
    Ok(OrbitType::new(raw.h, raw.k)?)
}

fn predicate(s: &str) -> Result<VertexPredicate, CliError> {
    s.parse().map_err(|e: rado_core::Error| CliError::Usage(e.to_string()))
}

fn emit<T: Serialize>(out: Out, value: &T) -> Result<u8, CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out, "{text}").map_err(io)?;
    Ok(0)
}

fn emit_or_save<T: Serialize>(out: Out, path: Option<&Path>, value: &T) -> Result<u8, CliError> {
    match path {
        Some(p) => {
            let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
            std::fs::write(p, text + "\n")
                .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
            Ok(0)
        }
        None => emit(out, value),
    }
}

fn boolean(out: Out, b: bool) -> Result<u8, CliError> {
    writeln!(out, "{b}").map_err(io)?;
    Ok(u8::from(!b))
}

fn copy_handle(args: &CopyArgs) -> Result<CopyHandle, CliError> {
    let mut c = CopyHandle::ambient();
    if let Some(o) = &args.within_orbit {
        c = orbit_copy(&c, &parse_orbit(o)?);
    }
    if let Some(p) = &args.within {
        c = CopyHandle::filtered(&c, predicate(p)?);
    }
    Ok(c)
}

fn plain_levels(out: Out, levels: &[FinSet]) -> Result<u8, CliError> {
    for (n, l) in levels.iter().enumerate() {
        writeln!(out, "L_{n} = {l}").map_err(io)?;
    }
    Ok(0)
}

fn load_fusion(path: &Path, cfg: &Config) -> Result<FusionResult, CliError> {
    let json: FusionJson = read_json(path, "fusion result")?;
    Ok(FusionResult::from_json(&json, cfg.search_bound)?)
}

fn iso_from(args: &IsoArgs, bound: usize) -> Result<PartialIso, CliError> {
    let f: FinSet = parse_json(&args.avoid_f, "set")?;
    let g: FinSet = parse_json(&args.avoid_g, "set")?;
    let schedule = match args.schedule {
        ScheduleArg::DomainFirst => Schedule::DomainFirst,
        ScheduleArg::RangeFirst => Schedule::RangeFirst,
    };
    Ok(back_and_forth(Vertex(args.pivot), f, g, args.steps, bound, schedule)?)
}

fn ambient_labeling(depth: usize, cfg: &Config) -> Result<Labeling, CliError> {
    cfg.check_depth(depth, cfg.depth_caps.treeorder, "tree")?;
    Ok(label(&CopyHandle::ambient(), depth, 0, None, cfg.search_bound)?)
}

pub fn run(cli: Cli, out: Out) -> Result<u8, CliError> {
    let flags = Overrides {
        search_bound: cli.search_bound,
        backtrack_budget: cli.backtrack_budget,
        format: cli.format,
    };
    let cfg = Config::resolve(cli.config.as_deref(), flags, std::env::var(SEARCH_BOUND_ENV).ok())?;
    let bound = cfg.search_bound;
    match cli.command {
        Command::Adj { u, v } => boolean(out, adjacent(Vertex(u), Vertex(v))),
        Command::Orbit(cmd) => orbit(cmd, &cfg, out),
        Command::Verify { copy, pattern_depth } => {
            if pattern_depth > MAX_PATTERN_DEPTH {
                return Err(CliError::Usage(format!("pattern depth is at most {MAX_PATTERN_DEPTH}")));
            }
            let report = verify_copy(&copy_handle(&copy)?, pattern_depth, bound)?;
            emit(out, &report)?;
            Ok(u8::from(!report.is_ok()))
        }
        Command::Label {
            depth,
            variant,
            copy,
            out: path,
        } => {
            cfg.check_depth(depth, cfg.depth_caps.labeling, "label")?;
            let lab = label(&copy_handle(&copy)?, depth, variant, None, bound)?;
            if cfg.format == Format::Plain && path.is_none() {
                return plain_levels(out, lab.levels());
            }
            emit_or_save(out, path.as_deref(), &lab.to_json()?)
        }
        Command::Tree(cmd) => tree(cmd, &cfg, out),
        Command::Iso { iso, out: path } => emit_or_save(out, path.as_deref(), &iso_from(&iso, bound)?),
        Command::Copy(CopyCmd::Split { iso, rounds, depth }) => {
            cfg.check_depth(depth, cfg.depth_caps.copies, "base")?;
            let map = iso_from(&iso, bound)?;
            let (f, g) = (map.avoid_f().clone(), map.avoid_g().clone());
            let shared = SharedIso::new(map);
            let base = Arc::new(extendible_base(Vertex(iso.pivot), &f, &g, &shared, depth, bound)?);
            let trace = split_extendible(&CopyHandle::labeled(base.clone()), &base, &shared, rounds, bound)?;
            emit(out, &trace)
        }
        Command::Fuse {
            oracle,
            depth,
            copy,
            out: path,
        } => {
            cfg.check_depth(depth, cfg.depth_caps.fusion, "fusion")?;
            let spec: OracleSpec = read_json(&oracle, "oracle spec")?;
            let fr = fuse(&copy_handle(&copy)?, Arc::new(spec), depth, bound)?;
            emit_or_save(out, path.as_deref(), &fr.to_json()?)
        }
        Command::Readoff { fusion, pred, n } => {
            let fr = load_fusion(&fusion, &cfg)?;
            let rho = branch_from_real(&fr, &predicate(&pred)?);
            writeln!(out, "{}", read_off(&fr, &rho, n)?).map_err(io)?;
            Ok(0)
        }
        Command::Slalom { fusion } => emit(out, &slalom(&load_fusion(&fusion, &cfg)?)),
        Command::Hl { tree, colors, height } => {
            let t: FiniteReversedTree = read_json(&tree, "tree")?;
            let colors: Vec<usize> = read_json(&colors, "coloring")?;
            if colors.len() != t.len() {
                return Err(CliError::Usage(format!(
                    "{} colors for {} nodes",
                    colors.len(),
                    t.len()
                )));
            }
            if height == 0 {
                return Err(CliError::Usage("height must be at least 1".into()));
            }
            match find_strong_subtree(&t, &colors, height) {
                Some(s) if cfg.format == Format::Dot => {
                    write!(out, "{}", export_subtree_dot(&t, &s, None)).map_err(io)?;
                    Ok(0)
                }
                Some(s) => emit(out, &s),
                None => {
                    writeln!(out, "null").map_err(io)?;
                    Ok(1)
                }
            }
        }
        Command::Unsplit { fusion, height } => {
            if height > cfg.depth_caps.ramsey + 1 {
                return Err(CliError::Usage(format!("height {height} exceeds the configured cap")));
            }
            let fr = load_fusion(&fusion, &cfg)?;
            let u = unsplit(&fr, height)?;
            if cfg.format == Format::Dot {
                let tt = truncate_tree(&fr.labeling, fr.depth())?;
                let labels: Vec<String> = tt
                    .nodes
                    .iter()
                    .map(|q| vertex(q, &fr.labeling).map(|v| v.to_string()))
                    .collect::<Result<_, _>>()?;
                write!(out, "{}", export_subtree_dot(&tt.tree, &u.subtree, Some(&labels))).map_err(io)?;
                return Ok(0);
            }
            emit(out, &u)
        }
        Command::Decided { p, copy } => emit(out, &decided_membership(&copy_handle(&copy)?, Vertex(p), 0)),
        Command::Counterexample { pred, copy } => {
            let ce = total_decision_counterexample(&copy_handle(&copy)?, &predicate(&pred)?, bound)?;
            emit(out, &ce)
        }
        Command::Greedy { colors, depth } => {
            cfg.check_depth(depth, cfg.depth_caps.labeling, "label")?;
            let m = colors as u64;
            let coloring = Arc::new(move |v: Vertex| if m == 0 { 0 } else { (v.0 % m) as usize });
            let g = monochromatic_copy_greedy(
                &CopyHandle::ambient(),
                coloring,
                colors,
                depth,
                bound,
                cfg.backtrack_budget,
            )?;
            let levels = g
                .copy
                .as_labeling()
                .expect("greedy returns a labeled copy")
                .levels()
                .to_vec();
            if cfg.format == Format::Plain {
                writeln!(out, "color {}", g.color).map_err(io)?;
                return plain_levels(out, &levels);
            }
            emit(
                out,
                &serde_json::json!({ "color": g.color, "levels": levels, "placements": g.placements }),
            )
        }
    }
}

fn orbit(cmd: OrbitCmd, cfg: &Config, out: Out) -> Result<u8, CliError> {
    let o = parse_orbit;
    match cmd {
        OrbitCmd::Member { v, orbit } => boolean(out, orbit_member(Vertex(v), &o(&orbit)?, &CopyHandle::ambient())),
        OrbitCmd::Least { orbit, from, copy } => {
            let v = least_orbit_member(&o(&orbit)?, Vertex(from), &copy_handle(&copy)?, cfg.search_bound)?;
            writeln!(out, "{v}").map_err(io)?;
            Ok(0)
        }
        OrbitCmd::Witness { orbit, above } => {
            let orbit = o(&orbit)?;
            let v = constructive_witness(&orbit, Vertex(above)).ok_or_else(|| {
                CliError::Core(rado_core::Error::PreconditionViolation(format!(
                    "the witness of {orbit} above {above} does not fit in 64 bits"
                )))
            })?;
            writeln!(out, "{v}").map_err(io)?;
            Ok(0)
        }
        OrbitCmd::Intersect { a, b } => emit(out, &intersect(&o(&a)?, &o(&b)?)),
        OrbitCmd::Subset { a, b } => boolean(out, is_suborbit(&o(&a)?, &o(&b)?)),
        OrbitCmd::Equal { a, b } => boolean(out, orbits_equal(&o(&a)?, &o(&b)?)),
    }
}

fn tree(cmd: TreeCmd, cfg: &Config, out: Out) -> Result<u8, CliError> {
    match cmd {
        TreeCmd::Dot { depth } => {
            let lab = ambient_labeling(depth, cfg)?;
            write!(out, "{}", export_dot(&lab, depth)?).map_err(io)?;
            Ok(0)
        }
        TreeCmd::Preds { n, k } => {
            let lab = ambient_labeling(n, cfg)?;
            let q = TreeNode::new(n, parse_json(&k, "set")?);
            emit(out, &immediate_predecessors(&q, &lab)?)
        }
        TreeCmd::Downset { n, k } => {
            let lab = ambient_labeling(n.saturating_sub(1), cfg)?;
            let q = TreeNode::new(n, parse_json(&k, "set")?);
            emit(out, &downset_orbit(&q, &lab)?)
        }
    }
}
