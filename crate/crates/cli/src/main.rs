mod args;
mod batch;
mod output;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use fspd_core::green::{green_max_asym, green_mb, ContourSpec};
use fspd_core::oracle::{price_by_convolution, price_by_mb2, QuadSpec};
use fspd_core::pricer::{call_price_series, term_grid};
use fspd_core::risk_neutral::{
    mu_mellin_barnes, mu_series, mu_subordination, risk_neutral_factor, MuResult, SUBORDINATION_NODES,
};
use fspd_core::types::{validate_model, MarketQuote, ModelParams, SeriesControl};
use serde_json::json;

use args::{Cli, Command, Format, GreenArgs, Method, MuArgs, PriceArgs, RouteArg, SmileArgs, TableArgs};
use output::{num, sig12, text, Exit, Failure};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::Usage as u8 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out).and_then(|exit| {
        out.flush()?;
        Ok(exit)
    });
    match result {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            let _ = out.flush();
            eprintln!("fspd: {e}");
            ExitCode::from(e.exit() as u8)
        }
    }
}

fn run(cli: &Cli, out: &mut impl Write) -> Result<Exit, Failure> {
    match &cli.command {
        Command::Price(a) => cmd_price(a, cli.format, out),
        Command::Table(a) => cmd_table(a, cli.format, out),
        Command::Batch(a) => {
            let input = File::open(&a.input).map_err(|e| Failure::Io(format!("{}: {e}", a.input.display())))?;
            let input = BufReader::new(input);
            match &a.output {
                Some(path) => {
                    let file = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                    batch::run(input, BufWriter::new(file), &a.series.control())
                }
                None => batch::run(input, out, &a.series.control()),
            }
        }
        Command::Mu(a) => cmd_mu(a, cli.format, out),
        Command::Green(a) => cmd_green(a, cli.format, out),
        Command::Smile(a) => cmd_smile(a, cli.format, out),
    }
}

fn params_json(p: &ModelParams, q: &MarketQuote) -> serde_json::Value {
    json!({
        "alpha": sig12(p.alpha),
        "gamma": sig12(p.gamma),
        "sigma": sig12(p.sigma),
        "theta": sig12(p.theta),
        "spot": sig12(q.spot),
        "strike": sig12(q.strike),
        "rate": sig12(q.rate),
        "dividend": sig12(q.dividend),
        "maturity": sig12(q.maturity),
    })
}

fn computed_mu(params: &ModelParams) -> Result<f64, Failure> {
    validate_model(*params, true)?;
    Ok(risk_neutral_factor(params)?.mu)
}

fn cmd_price(a: &PriceArgs, format: Format, out: &mut impl Write) -> Result<Exit, Failure> {
    let params = a.model.params();
    let quote = a.quote.quote();
    let control = a.series.control();
    let mu = match a.mu {
        Some(mu) => mu,
        None => computed_mu(&params)?,
    };
    let (price, terms, converged) = match a.method {
        Method::Series => {
            let r = call_price_series(&params, &quote, mu, &control)?;
            (r.price, Some(r.terms_used), r.converged)
        }
        Method::Convolution => (
            price_by_convolution(&params, &quote, mu, &QuadSpec::default())?,
            None,
            true,
        ),
        Method::Mb2 => {
            let auto = ContourSpec::auto();
            (price_by_mb2(&params, &quote, mu, (&auto, &auto))?, None, true)
        }
    };
    match format {
        Format::Text => {
            writeln!(out, "price      {}", text(price))?;
            writeln!(out, "mu         {}", text(mu))?;
            match terms {
                Some(t) => writeln!(out, "terms      {t}")?,
                None => writeln!(out, "terms      -")?,
            }
            writeln!(out, "converged  {converged}")?;
        }
        Format::Json => {
            let v = json!({
                "price": sig12(price),
                "mu": sig12(mu),
                "terms": terms,
                "converged": converged,
                "params": params_json(&params, &quote),
            });
            writeln!(out, "{v}")?;
        }
        Format::Csv => {
            writeln!(out, "price,mu,terms,converged")?;
            let terms = terms.map(|t| t.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{terms},{converged}", num(price), num(mu))?;
        }
    }
    Ok(if converged { Exit::Ok } else { Exit::NoConvergence })
}

fn cmd_table(a: &TableArgs, format: Format, out: &mut impl Write) -> Result<Exit, Failure> {
    if a.max_m == 0 {
        return Err(Failure::Usage("--max-m must be at least 1".into()));
    }
    let params = a.model.params();
    let quote = a.quote.quote();
    let grid = term_grid(&params, &quote, computed_mu(&params)?, a.max_n, a.max_m)?;
    let call = grid.cumulative_by_column();
    let cols = 1..=grid.m_max;
    match format {
        Format::Text => {
            let mut head = format!("{:>6}", "n\\m");
            for m in cols.clone() {
                head.push_str(&format!("{m:>12}"));
            }
            writeln!(out, "{head}")?;
            for n in 0..=grid.n_max {
                let mut line = format!("{n:>6}");
                for m in cols.clone() {
                    line.push_str(&format!("{:>12}", text(grid.get(n, m).unwrap())));
                }
                writeln!(out, "{line}")?;
            }
            let mut line = format!("{:>6}", "Call");
            for c in &call {
                line.push_str(&format!("{:>12}", text(*c)));
            }
            writeln!(out, "{line}")?;
        }
        Format::Csv => {
            writeln!(out, "n,m,term")?;
            for n in 0..=grid.n_max {
                for m in cols.clone() {
                    writeln!(out, "{n},{m},{}", num(grid.get(n, m).unwrap()))?;
                }
            }
            for (m, c) in cols.clone().zip(&call) {
                writeln!(out, "call,{m},{}", num(*c))?;
            }
        }
        Format::Json => {
            let terms: Vec<Vec<f64>> = (0..=grid.n_max)
                .map(|n| cols.clone().map(|m| sig12(grid.get(n, m).unwrap())).collect())
                .collect();
            let call: Vec<f64> = call.iter().copied().map(sig12).collect();
            writeln!(
                out,
                "{}",
                json!({ "terms": terms, "call": call, "params": params_json(&params, &quote) })
            )?;
        }
    }
    Ok(Exit::Ok)
}

fn cmd_mu(a: &MuArgs, format: Format, out: &mut impl Write) -> Result<Exit, Failure> {
    let params = a.model.params();
    let r: MuResult = match a.route {
        RouteArg::Auto => risk_neutral_factor(&params)?,
        RouteArg::Series => mu_series(&params, &SeriesControl::for_mu())?,
        RouteArg::Mb => mu_mellin_barnes(&params, &ContourSpec::auto())?,
        RouteArg::Subordination => mu_subordination(&params, SUBORDINATION_NODES)?,
    };
    let route = serde_json::to_value(r.route).unwrap_or_default();
    let route = route.as_str().unwrap_or("");
    match format {
        Format::Text => writeln!(out, "mu {} ({route}, {} terms or nodes)", text(r.mu), r.terms_or_nodes)?,
        Format::Csv => {
            writeln!(out, "mu,route,terms_or_nodes")?;
            writeln!(out, "{},{route},{}", num(r.mu), r.terms_or_nodes)?;
        }
        Format::Json => writeln!(
            out,
            "{}",
            json!({ "mu": sig12(r.mu), "route": route, "terms_or_nodes": r.terms_or_nodes })
        )?,
    }
    Ok(Exit::Ok)
}

fn cmd_green(a: &GreenArgs, format: Format, out: &mut impl Write) -> Result<Exit, Failure> {
    let params = validate_model(a.model.params(), false)?;
    let mu = match a.mu {
        Some(mu) => mu,
        None => risk_neutral_factor(&params)?.mu,
    };
    let contour = ContourSpec::auto();
    let mut samples = Vec::new();
    for x in a.x.points() {
        if x.abs() < 1e-12 {
            continue;
        }
        let g = if params.is_max_asymmetry() {
            green_max_asym(x, a.t, &params, mu, &contour)?
        } else {
            green_mb(x, a.t, &params, mu, &contour)?
        };
        samples.push((x, g));
    }
    match format {
        Format::Csv => {
            writeln!(out, "x,g")?;
            for (x, g) in &samples {
                writeln!(out, "{},{}", num(*x), num(*g))?;
            }
        }
        Format::Text => {
            for (x, g) in &samples {
                writeln!(out, "{:>10} {:>12}", text(*x), text(*g))?;
            }
        }
        Format::Json => {
            let rows: Vec<_> = samples
                .iter()
                .map(|(x, g)| json!({ "x": sig12(*x), "g": sig12(*g) }))
                .collect();
            writeln!(out, "{}", serde_json::Value::Array(rows))?;
        }
    }
    Ok(Exit::Ok)
}

fn cmd_smile(a: &SmileArgs, format: Format, out: &mut impl Write) -> Result<Exit, Failure> {
    let params = a.model.params();
    let mu = computed_mu(&params)?;
    let control = a.series.control();
    let base = a.quote.quote();
    let mut rows = Vec::new();
    for strike in a.strikes.points() {
        let q = MarketQuote { strike, ..base };
        rows.push((strike, call_price_series(&params, &q, mu, &control)?.price));
    }
    match format {
        Format::Csv => {
            writeln!(out, "strike,price")?;
            for (k, c) in &rows {
                writeln!(out, "{},{}", num(*k), num(*c))?;
            }
        }
        Format::Text => {
            for (k, c) in &rows {
                writeln!(out, "{:>12} {:>12}", text(*k), text(*c))?;
            }
        }
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(k, c)| json!({ "strike": sig12(*k), "price": sig12(*c) }))
                .collect();
            writeln!(out, "{}", json!({ "mu": sig12(mu), "prices": v }))?;
        }
    }
    Ok(Exit::Ok)
}
