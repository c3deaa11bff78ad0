use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ledgerdp::exact::ExtRational;
use ledgerdp::session::Catalog;
use ledgerdp::{PrivacyUnit, QueryExpr, Schema, Table, TableDomain};
use serde::Deserialize;

use crate::Failure;

/// Table schemas, keyed by table name. Private tables are read from
/// `<data>/<name>.csv`, public tables likewise.
#[derive(Debug)]
pub struct Manifest {
    pub tables: BTreeMap<String, TableDomain>,
    pub public_tables: BTreeMap<String, TableDomain>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    tables: BTreeMap<String, TableDomain>,
    #[serde(default)]
    public_tables: BTreeMap<String, TableDomain>,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Accepts either `{"tables": {...}, "public_tables": {...}}` or a single
/// table schema, which is then named after the file stem.
pub fn load_manifest(path: &Path) -> Result<Manifest, Failure> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::config(format!("{}: {e}", path.display()));
    let manifest = if value.get("tables").is_some() {
        let raw: RawManifest = serde_json::from_value(value).map_err(bad)?;
        Manifest {
            tables: raw.tables,
            public_tables: raw.public_tables,
        }
    } else {
        let domain: TableDomain = serde_json::from_value(value).map_err(bad)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Failure::config(format!("{}: cannot name table", path.display())))?
            .to_string();
        Manifest {
            tables: BTreeMap::from([(name, domain)]),
            public_tables: BTreeMap::new(),
        }
    };
    if manifest.tables.is_empty() {
        return Err(Failure::config("schema names no private tables"));
    }
    for name in manifest.tables.keys().chain(manifest.public_tables.keys()) {
        check_file_name(name, "table")?;
    }
    if let Some(dup) = manifest.tables.keys().find(|n| manifest.public_tables.contains_key(*n)) {
        return Err(Failure::config(format!("table `{dup}` is both private and public")));
    }
    Ok(manifest)
}

/// Names double as file names, so path separators and dot-only names are
/// refused.
pub fn check_file_name(name: &str, what: &str) -> Result<(), Failure> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\'])
        && !name.chars().any(char::is_control);
    if ok {
        Ok(())
    } else {
        Err(Failure::config(format!("invalid {what} name `{name}`")))
    }
}

impl Manifest {
    pub fn csv_path(data: &Path, name: &str) -> PathBuf {
        data.join(format!("{name}.csv"))
    }

    /// Checks a declared identifier column against the privacy unit.
    pub fn check_unit(&self, unit: &PrivacyUnit) -> Result<(), Failure> {
        for (name, domain) in &self.tables {
            if let (Some(declared), PrivacyUnit::AddRemoveId(id)) = (&domain.id_column, unit) {
                if declared != id {
                    return Err(Failure::config(format!(
                        "table `{name}` declares id column `{declared}` but the unit uses `{id}`"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn private_schemas(&self) -> impl Iterator<Item = (String, Schema)> + '_ {
        self.tables.iter().map(|(n, d)| (n.clone(), d.schema.clone()))
    }

    pub fn catalog(&self, unit: PrivacyUnit, public: &BTreeMap<String, Table>) -> Result<Catalog, Failure> {
        let mut catalog = Catalog::new(unit, self.private_schemas()).map_err(Failure::config)?;
        for (name, table) in public {
            catalog.add_public_table(name.clone(), table.clone()).map_err(Failure::config)?;
        }
        Ok(catalog)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptQuery {
    pub name: String,
    pub spend: ExtRational,
    pub expr: QueryExpr,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub queries: Vec<ScriptQuery>,
}

pub fn load_script(path: &Path) -> Result<Script, Failure> {
    let text = read(path)?;
    let script: Script =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut seen = BTreeSet::new();
    for q in &script.queries {
        check_file_name(&q.name, "query")?;
        if !seen.insert(q.name.as_str()) {
            return Err(Failure::config(format!("query name `{}` used twice", q.name)));
        }
    }
    Ok(script)
}
