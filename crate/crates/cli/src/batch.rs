//! CSV batch pricing. Rows are priced in parallel and written in input
//! order; a failing row records its message in the `error` column.

use std::io::{Read, Write};

use fspd_core::error::Error;
use fspd_core::pricer::call_price_series;
use fspd_core::risk_neutral::MuCache;
use fspd_core::types::{MarketQuote, ModelParams, SeriesControl};
use rayon::prelude::*;

use crate::output::{exit_for, num, Exit, Failure};

pub const INPUT_COLUMNS: [&str; 9] = [
    "id", "spot", "strike", "rate", "dividend", "maturity", "alpha", "gamma", "sigma",
];
pub const OUTPUT_COLUMNS: [&str; 5] = ["mu", "price", "terms", "converged", "error"];

struct Priced {
    mu: f64,
    price: f64,
    terms: usize,
    converged: bool,
}

enum RowError {
    Parse(String),
    Model(Error),
}

fn parse_row(record: &csv::StringRecord, index: &[usize; 9]) -> Result<(ModelParams, MarketQuote), String> {
    let field = |k: usize| -> Result<f64, String> {
        let raw = record.get(index[k]).unwrap_or("").trim();
        raw.parse::<f64>()
            .map_err(|_| format!("{}: not a number: {raw:?}", INPUT_COLUMNS[k]))
    };
    let quote = MarketQuote::new(field(1)?, field(2)?, field(3)?, field(4)?, field(5)?);
    let params = ModelParams::max_asymmetry(field(6)?, field(7)?, field(8)?);
    Ok((params, quote))
}

fn price_row(
    record: &csv::StringRecord,
    index: &[usize; 9],
    cache: &MuCache,
    control: &SeriesControl,
) -> Result<Priced, RowError> {
    let (params, quote) = parse_row(record, index).map_err(RowError::Parse)?;
    let mu = cache.mu(&params).map_err(RowError::Model)?;
    let r = call_price_series(&params, &quote, mu, control).map_err(RowError::Model)?;
    Ok(Priced {
        mu,
        price: r.price,
        terms: r.terms_used,
        converged: r.converged,
    })
}

/// Reads, prices and writes; the exit status is `Ok` if any row priced or
/// there were no rows, otherwise that of the first failure.
pub fn run<R: Read, W: Write>(input: R, output: W, control: &SeriesControl) -> Result<Exit, Failure> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Failure::Usage(format!("cannot read header: {e}")))?
        .clone();
    let mut index = [0usize; 9];
    for (k, name) in INPUT_COLUMNS.iter().enumerate() {
        index[k] = headers.iter().position(|h| h == *name).ok_or_else(|| {
            Failure::Usage(format!(
                "header lacks column {name:?}; need {}",
                INPUT_COLUMNS.join(",")
            ))
        })?;
    }
    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;

    let cache = MuCache::new();
    let results: Vec<Result<Priced, RowError>> = records
        .par_iter()
        .map(|r| price_row(r, &index, &cache, control))
        .collect();

    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(output);
    let mut out_header: Vec<&str> = headers.iter().collect();
    out_header.extend(OUTPUT_COLUMNS);
    writer.write_record(&out_header)?;

    let mut any_ok = records.is_empty();
    let mut first_failure = None;
    for (record, result) in records.iter().zip(&results) {
        let mut row: Vec<String> = record.iter().map(str::to_owned).collect();
        row.resize(headers.len(), String::new());
        match result {
            Ok(p) => {
                any_ok = true;
                row.extend([
                    num(p.mu),
                    num(p.price),
                    p.terms.to_string(),
                    p.converged.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                let (status, message) = match e {
                    RowError::Parse(m) => (Exit::Usage, m.clone()),
                    RowError::Model(e) => (exit_for(e), e.to_string()),
                };
                first_failure.get_or_insert(status);
                row.extend([String::new(), String::new(), String::new(), "false".into(), message]);
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(if any_ok {
        Exit::Ok
    } else {
        first_failure.unwrap_or(Exit::Ok)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,spot,strike,rate,dividend,maturity,alpha,gamma,sigma\n";

    fn run_str(input: &str) -> (String, Exit) {
        let mut out = Vec::new();
        let exit = run(input.as_bytes(), &mut out, &SeriesControl::default()).unwrap();
        (String::from_utf8(out).unwrap(), exit)
    }

    #[test]
    fn prices_rows_in_order_and_isolates_failures() {
        let input = format!(
            "{HEADER}a,3800,4000,0.01,0,1,1.7,0.9,0.2\nb,3800,4000,0.01,0,1,1.7,0.1,0.2\nc,100,100,0,0,1,2,1,0.2\n"
        );
        let (out, exit) = run_str(&input);
        assert_eq!(exit, Exit::Ok);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(
            lines[0],
            "id,spot,strike,rate,dividend,maturity,alpha,gamma,sigma,mu,price,terms,converged,error"
        );
        assert!(lines[1].starts_with("a,") && lines[1].contains(",290.12868"));
        assert!(lines[2].starts_with("b,") && lines[2].contains("1 - 1/alpha"));
        assert!(lines[3].starts_with("c,") && lines[3].contains(",7.96556"));
    }

    #[test]
    fn empty_input_writes_the_header() {
        let (out, exit) = run_str(HEADER);
        assert_eq!(exit, Exit::Ok);
        assert_eq!(out.lines().count(), 1);
    }

    #[test]
    fn missing_column_is_a_usage_error() {
        let r = run(
            "id,spot,strike\n1,2,3\n".as_bytes(),
            Vec::new(),
            &SeriesControl::default(),
        );
        assert_eq!(r.unwrap_err().exit(), Exit::Usage);
    }

    #[test]
    fn all_rows_failing_reports_the_first_failure() {
        let (out, exit) = run_str(&format!("{HEADER}a,3800,4000,0.01,0,1,1.7,0.1,0.2\n"));
        assert_eq!(exit, Exit::Domain);
        assert!(out.lines().nth(1).unwrap().ends_with(")"));
        let (_, exit) = run_str(&format!("{HEADER}a,x,4000,0.01,0,1,1.7,0.9,0.2\n"));
        assert_eq!(exit, Exit::Usage);
    }
}
