//! Loading files and parsing list flags.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use taxnext_core::eventlog::{Diagnosis, EventLog};
use taxnext_core::taxonomy::{CmGroups, Taxonomy};

use crate::{CliError, TaxonomyArgs};

fn data(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn read_log(path: &Path) -> Result<EventLog, CliError> {
    let file = File::open(path).map_err(|e| data(path, e))?;
    EventLog::read_json(BufReader::new(file)).map_err(|e| data(path, e))
}

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Diagnoses,
    Procedures,
}

/// `*.tsv` files hold `child<TAB>parent[<TAB>description]` rows; anything
/// else is read as a CMS order file.
pub fn read_taxonomy(id: &str, path: &Path, kind: Kind, groups: Option<&Path>) -> Result<Taxonomy, CliError> {
    let bytes = std::fs::read(path).map_err(|e| data(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv")) {
        let text = String::from_utf8(bytes).map_err(|e| data(path, e))?;
        return Taxonomy::parse_tsv(id, &text).map_err(|e| data(path, e));
    }
    match kind {
        Kind::Diagnoses => {
            let groups = match groups {
                Some(g) => {
                    let text = std::fs::read_to_string(g).map_err(|e| data(g, e))?;
                    Some(CmGroups::parse_tsv(&text).map_err(|e| data(g, e))?)
                }
                None => None,
            };
            Taxonomy::parse_icd10cm(id, &bytes, groups.as_ref()).map_err(|e| data(path, e))
        }
        Kind::Procedures => Taxonomy::parse_icd10pcs(id, &bytes).map_err(|e| data(path, e)),
    }
}

/// Both taxonomies, required.
pub fn taxonomies(args: &TaxonomyArgs, dx_id: &str, px_id: &str) -> Result<(Taxonomy, Taxonomy), CliError> {
    let (Some(cm), Some(pcs)) = (&args.tax_cm, &args.tax_pcs) else {
        return Err(CliError::Usage("--tax-cm and --tax-pcs are required".into()));
    };
    let (dx, px) = rayon::join(
        || read_taxonomy(dx_id, cm, Kind::Diagnoses, args.cm_groups.as_deref()),
        || read_taxonomy(px_id, pcs, Kind::Procedures, None),
    );
    Ok((dx?, px?))
}

/// `I214:1,E119:2` into diagnoses.
pub fn parse_diagnoses(s: &str) -> Result<Vec<Diagnosis>, CliError> {
    let list: Vec<Diagnosis> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|item| {
            let (code, seq) = item
                .rsplit_once(':')
                .ok_or_else(|| CliError::Usage(format!("diagnosis {item:?} is not CODE:SEQ")))?;
            let seq: u32 = seq
                .trim()
                .parse()
                .ok()
                .filter(|&s| s >= 1)
                .ok_or_else(|| CliError::Usage(format!("diagnosis {item:?}: SEQ must be a positive integer")))?;
            Ok(Diagnosis {
                code: code.trim().to_string(),
                seq,
            })
        })
        .collect::<Result<_, CliError>>()?;
    if list.is_empty() {
        return Err(CliError::Usage("--diagnoses needs at least one CODE:SEQ".into()));
    }
    Ok(list)
}

pub fn parse_events(s: &str) -> Result<Vec<String>, CliError> {
    let list: Vec<String> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if list.is_empty() {
        return Err(CliError::Usage("--events needs at least one code".into()));
    }
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnoses_flag() {
        let d = parse_diagnoses("I214:1, E119:2").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!((d[1].code.as_str(), d[1].seq), ("E119", 2));
        assert!(matches!(parse_diagnoses("I214"), Err(CliError::Usage(_))));
        assert!(matches!(parse_diagnoses("I214:0"), Err(CliError::Usage(_))));
        assert!(matches!(parse_diagnoses("I214:x"), Err(CliError::Usage(_))));
        assert!(matches!(parse_diagnoses(" , "), Err(CliError::Usage(_))));
    }

    #[test]
    fn events_flag() {
        assert_eq!(parse_events("A, B,,C").unwrap(), ["A", "B", "C"]);
        assert!(parse_events("").is_err());
    }
}
