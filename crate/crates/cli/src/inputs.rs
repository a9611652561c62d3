use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rightsize_core::bench::{GridReplay, PRESET_NAMES};
use rightsize_core::space::SpaceDescriptor;
use rightsize_core::{
    default_pricing, preset, solve_pricing, Family, GridDataset, InstancePriceRecord, PricingTable, SearchSpace,
    Strategy, SyntheticEvaluator, SyntheticFunctionSpec, Workload,
};

use crate::failure::Failure;
use crate::{CliResult, SourceArgs};

pub fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::io(path, e))
}

pub fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

pub fn read_price_sheet(path: &Path) -> CliResult<Vec<InstancePriceRecord>> {
    Ok(PricingTable::read_records(open(path)?)?)
}

pub fn pricing(source: &SourceArgs) -> CliResult<PricingTable> {
    match &source.pricing {
        Some(path) => Ok(solve_pricing(&read_price_sheet(path)?)?),
        None => Ok(default_pricing()),
    }
}

/// Parses `decoupled`, `single:F`, `prop:F` or `fixed:F`.
pub fn parse_strategy(s: &str) -> CliResult<Strategy> {
    let (kind, family) = match s.split_once(':') {
        Some((k, f)) => (k, Some(Family::from(f))),
        None => (s, None),
    };
    match (kind, family) {
        ("decoupled", None) => Ok(Strategy::Decoupled),
        ("single", Some(f)) => Ok(Strategy::DecoupledSingleFamily(f)),
        ("prop", Some(f)) => Ok(Strategy::PropCpu(f)),
        ("fixed", Some(f)) => Ok(Strategy::FixedCpu(f)),
        _ => Err(Failure::usage(format!("cannot parse strategy `{s}`"))),
    }
}

pub fn space(source: &SourceArgs) -> CliResult<SearchSpace> {
    let mut desc: SpaceDescriptor = match &source.space {
        Some(path) => serde_json::from_str(&read_string(path)?)?,
        None => SpaceDescriptor::default(),
    };
    if let Some(s) = &source.strategy {
        desc.strategy = Some(parse_strategy(s)?);
    }
    Ok(SearchSpace::from_descriptor(desc)?)
}

fn synthetic_spec(entry: &str) -> CliResult<SyntheticFunctionSpec> {
    if PRESET_NAMES.contains(&entry) {
        return Ok(preset(entry)?);
    }
    let path = PathBuf::from(entry);
    let mut spec: SyntheticFunctionSpec = serde_json::from_str(&read_string(&path)?)?;
    if spec.name.is_empty() {
        spec.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "synthetic".into());
    }
    spec.validate()?;
    Ok(spec)
}

/// Synthetic specs named on the command line, or every preset.
pub fn synthetic_specs(source: &SourceArgs) -> CliResult<Vec<SyntheticFunctionSpec>> {
    if source.synthetic.is_empty() {
        return PRESET_NAMES.iter().map(|n| Ok(preset(n)?)).collect();
    }
    source.synthetic.iter().map(|e| synthetic_spec(e)).collect()
}

pub fn workloads(source: &SourceArgs) -> CliResult<Vec<Workload>> {
    let Some(path) = &source.grid else {
        return Ok(synthetic_specs(source)?
            .into_iter()
            .map(|s| Workload::Synthetic(SyntheticEvaluator::new(s, &source.input)))
            .collect());
    };
    let grid = Arc::new(GridDataset::read_csv(open(path)?)?);
    let functions = match &source.function {
        Some(f) => vec![f.clone()],
        None => grid.functions(),
    };
    if functions.is_empty() {
        return Err(Failure::domain(format!("{}: grid has no rows", path.display())));
    }
    functions
        .into_iter()
        .map(|f| {
            if !grid.inputs(&f).contains(&source.input) {
                return Err(Failure::domain(format!("grid has no input `{}` for function `{f}`", source.input)));
            }
            Ok(Workload::Replay(GridReplay {
                grid: Arc::clone(&grid),
                function_id: f,
                input_id: source.input.clone(),
            }))
        })
        .collect()
}

pub fn families(names: &[String]) -> Vec<Family> {
    names.iter().filter(|n| !n.is_empty()).map(|n| Family::from(n.as_str())).collect()
}
