//! Loading programs and category definitions.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use odcheck_core::lang::{SecurityLabel, Value, VarId};
use odcheck_core::{parse, Category, Program};
use serde::Deserialize;

pub fn load_program(path: &Path) -> Result<Program> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).map_err(|e| anyhow!("{}:{}", path.display(), e))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategorySpec {
    name: String,
    #[serde(default)]
    low: BTreeMap<String, Value>,
    #[serde(default)]
    high_domains: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CategoryFile {
    Wrapped { categories: Vec<CategorySpec> },
    Bare(Vec<CategorySpec>),
}

/// `arg` is either inline JSON (starting with `{` or `[`) or a file path.
/// Without it, the program's declared initial values form one category
/// named `default`.
pub fn load_categories(program: &Program, arg: Option<&str>) -> Result<Vec<Category>> {
    let Some(arg) = arg else {
        return Ok(vec![Category::from_program(program, "default")]);
    };
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (arg.to_string(), "inline categories".to_string())
    } else {
        let text = std::fs::read_to_string(arg).with_context(|| format!("cannot read {arg}"))?;
        (text, arg.to_string())
    };
    let specs = match serde_json::from_str::<CategoryFile>(&text)
        .with_context(|| format!("{origin}: malformed category definitions"))?
    {
        CategoryFile::Wrapped { categories } | CategoryFile::Bare(categories) => categories,
    };
    specs.into_iter().map(|s| build(program, s)).collect()
}

fn resolve(program: &Program, category: &str, name: &str, want: SecurityLabel) -> Result<VarId> {
    let d = program
        .lookup(name)
        .ok_or_else(|| anyhow!("category `{category}`: unknown variable `{name}`"))?;
    if d.label != want {
        bail!("category `{category}`: `{name}` is not a {want} variable");
    }
    Ok(d.id)
}

fn build(program: &Program, spec: CategorySpec) -> Result<Category> {
    let mut low = BTreeMap::new();
    for (name, v) in &spec.low {
        low.insert(resolve(program, &spec.name, name, SecurityLabel::Low)?, *v);
    }
    let mut highs = BTreeMap::new();
    for (name, dom) in &spec.high_domains {
        highs.insert(
            resolve(program, &spec.name, name, SecurityLabel::High)?,
            dom.clone(),
        );
    }
    Ok(Category::new(program, spec.name, &low, &highs)?)
}
