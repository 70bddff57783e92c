mod common;

use common::{table_params, table_quote, TABLE1_PRICE};
use fspd_core::green::ContourSpec;
use fspd_core::oracle::{bs_closed_form, price_by_convolution, price_by_mb2, QuadSpec};
use fspd_core::pricer::{call_price_series, term_grid};
use fspd_core::risk_neutral::risk_neutral_factor;
use fspd_core::types::{MarketQuote, ModelParams, SeriesControl};

fn mu(p: &ModelParams) -> f64 {
    risk_neutral_factor(p).unwrap().mu
}

#[test]
fn table_price_three_ways() {
    let (p, q) = (table_params(), table_quote());
    let m = mu(&p);
    let series = call_price_series(&p, &q, m, &SeriesControl::new(1e-10, 64))
        .unwrap()
        .price;
    let conv = price_by_convolution(&p, &q, m, &QuadSpec::default()).unwrap();
    let mb2 = price_by_mb2(&p, &q, m, (&ContourSpec::at(-1.6), &ContourSpec::at(0.4))).unwrap();
    for v in [series, conv, mb2] {
        assert!((v - TABLE1_PRICE).abs() < 1e-6, "{v}");
    }
}

#[test]
fn term_grid_reproduces_converged_price() {
    let (p, q) = (table_params(), table_quote());
    let grid = term_grid(&p, &q, mu(&p), 20, 20).unwrap();
    assert!((grid.total() - TABLE1_PRICE).abs() < 1e-9);
}

#[test]
fn second_model_on_the_table_quote() {
    let p = ModelParams::max_asymmetry(1.5, 0.8, 0.2);
    let q = table_quote();
    let m = mu(&p);
    let series = call_price_series(&p, &q, m, &SeriesControl::new(1e-10, 64))
        .unwrap()
        .price;
    assert!((series - 369.258_394_821).abs() < 1e-6);
    let conv = price_by_convolution(&p, &q, m, &QuadSpec::default()).unwrap();
    let a = price_by_mb2(&p, &q, m, (&ContourSpec::auto(), &ContourSpec::auto())).unwrap();
    let b = price_by_mb2(&p, &q, m, (&ContourSpec::at(-0.8), &ContourSpec::at(0.7))).unwrap();
    assert!((conv / series - 1.0).abs() < 1e-9);
    assert!((a / series - 1.0).abs() < 1e-9);
    assert!((b / a - 1.0).abs() < 1e-4);
}

#[test]
fn space_fractional_case_on_the_table_quote() {
    let p = ModelParams::max_asymmetry(1.7, 1.0, 0.2);
    let q = table_quote();
    let series = call_price_series(&p, &q, mu(&p), &SeriesControl::new(1e-10, 64))
        .unwrap()
        .price;
    assert!((series - 256.035_056_246).abs() < 1e-6);
    let conv = price_by_convolution(&p, &q, mu(&p), &QuadSpec::default()).unwrap();
    assert!((conv / series - 1.0).abs() < 1e-9);
}

#[test]
fn convolution_far_out_of_the_money() {
    let (p, _) = (table_params(), table_quote());
    let q = MarketQuote::new(3800.0, 4.0e5, 0.01, 0.0, 1.0);
    let v = price_by_convolution(&p, &q, mu(&p), &QuadSpec::default()).unwrap();
    assert!(v.abs() < 1e-6, "{v}");
}

#[test]
fn black_scholes_through_every_route() {
    let p = ModelParams::max_asymmetry(2.0, 1.0, 0.25);
    let q = MarketQuote::new(100.0, 110.0, 0.0, 0.0, 0.5);
    let m = mu(&p);
    let bs = bs_closed_form(&q, 0.25);
    let series = call_price_series(&p, &q, m, &SeriesControl::new(1e-12, 160))
        .unwrap()
        .price;
    let conv = price_by_convolution(&p, &q, m, &QuadSpec::default()).unwrap();
    let mb2 = price_by_mb2(&p, &q, m, (&ContourSpec::auto(), &ContourSpec::auto())).unwrap();
    for v in [series, conv, mb2] {
        assert!((v / bs - 1.0).abs() < 1e-8, "{v} vs {bs}");
    }
}

#[test]
fn convolution_rejects_bad_inputs() {
    let (p, q) = (table_params(), table_quote());
    assert!(price_by_convolution(&p, &q, 0.01, &QuadSpec::default())
        .unwrap_err()
        .is_domain());
    let spec = QuadSpec {
        tol: 0.0,
        ..QuadSpec::default()
    };
    assert!(price_by_convolution(&p, &q, mu(&p), &spec).unwrap_err().is_domain());
    let short = QuadSpec {
        y_max: 0.6,
        ..QuadSpec::default()
    };
    assert!(matches!(
        price_by_convolution(&p, &q, mu(&p), &short),
        Err(fspd_core::error::Error::NoConvergence { .. })
    ));
}
