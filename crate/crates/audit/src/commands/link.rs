use credit_audit_core::linkage::{link, MatchResult};
use credit_audit_core::Race;
use serde::Serialize;

use crate::config::{required, RunConfig};
use crate::error::Result;
use crate::formats::{read_bisg_people, read_bisg_tables, read_bureau, read_crosswalk, read_hmda};
use crate::output::{num, Outputs, Table};

#[derive(Serialize)]
struct BisgRow<'a> {
    id: &'a str,
    surname: &'a str,
    geo: &'a str,
    posterior: [f64; 6],
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let p = &cfg.paths;
    let bureau_path = required(&p.bureau, "bureau")?;
    let hmda_path = required(&p.hmda, "hmda")?;
    let crosswalk_path = required(&p.crosswalk, "crosswalk")?;
    let bureau = read_bureau(bureau_path)?;
    let hmda = read_hmda(hmda_path)?;
    let crosswalk = read_crosswalk(crosswalk_path)?;
    for path in [bureau_path, hmda_path, crosswalk_path] {
        out.record_input(path)?;
    }

    let result: MatchResult = link(bureau, hmda, &crosswalk, cfg.link.coverage)?;
    out.json("match_result.json", &result)?;
    let mut pairs = Table::new(["bureau_id", "hmda_id"]);
    for (b, h) in &result.pairs {
        pairs.push([b.clone(), h.clone()]);
    }
    out.csv("matched_pairs.csv", &pairs)?;

    let bisg_paths = [&p.surname_prior, &p.geo_likelihood, &p.bisg_people];
    if bisg_paths.iter().all(|p| p.is_none()) {
        return Ok(());
    }
    let surnames = required(&p.surname_prior, "surname_prior")?;
    let geos = required(&p.geo_likelihood, "geo_likelihood")?;
    let people_path = required(&p.bisg_people, "bisg_people")?;
    let tables = read_bisg_tables(surnames, geos)?;
    tables.validate()?;
    let people = read_bisg_people(people_path)?;
    for path in [surnames, geos, people_path] {
        out.record_input(path)?;
    }
    let mut rows = Vec::with_capacity(people.len());
    for person in &people {
        rows.push(BisgRow {
            id: &person.id,
            surname: &person.surname,
            geo: &person.geo,
            posterior: tables.posterior(&person.surname, &person.geo)?,
        });
    }
    let mut t = Table::new(["id", "surname", "geo"].into_iter().chain(Race::ALL.map(Race::code)));
    for r in &rows {
        t.push(
            [r.id.to_string(), r.surname.to_string(), r.geo.to_string()]
                .into_iter()
                .chain(r.posterior.map(num)),
        );
    }
    out.report("bisg", &t, &rows)
}
