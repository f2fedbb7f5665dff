//! Implementation of each command. Every file written is a pure function of
//! the input data, the configuration and the seed.

use std::path::Path;

use serde::Serialize;
use valuation_lab::continuous::{
    simulate_optimal_path, solve_consumption_ode_with, solve_terminal_pde_with, CtModelSpec, Drift, RiskFree, ThetaGrid,
};
use valuation_lab::market_data::{bundled_rates, parse_market_csv_with_window, parse_rate_csv, real_riskfree, RawMarketTable};
use valuation_lab::report::{golden_checks, HistoricalAnalysis};
use valuation_lab::ruin::{portfolio_ruin, portfolio_ruin_csv, ruin_surface, PortfolioRuleConfig, RuinConfig};
use valuation_lab::stats::{mean, std_dev};
use valuation_lab::valuation::FitReport;

use crate::config::Config;
use crate::{Args, CliError, Command};

pub fn dispatch(args: &Args, config: &Config) -> Result<(), CliError> {
    let raw = load_table(args, config)?;
    let analysis = HistoricalAnalysis::new(&raw, config.window)?;
    let out = args.out.as_path();
    match args.command {
        Command::Ingest => write(out, "derived.csv", &analysis.derived.to_csv()),
        Command::Fit => fit(out, &analysis),
        Command::Diagnose => diagnose(out, &analysis),
        Command::Predict => predict(out, &analysis),
        Command::Ruin => ruin(out, &analysis, config, args.seed),
        Command::Portfolio => portfolio(out, &raw, &analysis, config, args.seed),
        Command::Ctsim => ctsim(out, &raw, &analysis, config, args.seed),
        Command::Report => report(out, &analysis),
    }
}

fn load_table(args: &Args, config: &Config) -> Result<RawMarketTable, CliError> {
    let bytes = match &args.input {
        Some(p) => std::fs::read(p).map_err(|e| CliError::input("InputUnreadable", format!("{}: {e}", p.display())))?,
        None => valuation_lab::SHILLER_ANNUAL_CSV.as_bytes().to_vec(),
    };
    Ok(parse_market_csv_with_window(&bytes, config.window)?)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::input("OutputNotWritable", format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError {
        code: 3,
        kind: "Serialization".into(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write(dir, name, &text)
}

fn fit(out: &Path, a: &HistoricalAnalysis) -> Result<(), CliError> {
    write_json(out, "fit_tr_cape.json", &FitReport::from(&a.tr_cape))?;
    write_json(out, "fit_bubble.json", &FitReport::from(&a.bubble))
}

#[derive(Serialize)]
struct DiagnosticRow<'a> {
    model: &'a str,
    #[serde(flatten)]
    diagnostic: &'a valuation_lab::valuation::Diagnostic,
}

fn diagnose(out: &Path, a: &HistoricalAnalysis) -> Result<(), CliError> {
    let all = a.diagnostics();
    let rows: Vec<DiagnosticRow> = all.iter().map(|(m, d)| DiagnosticRow { model: m, diagnostic: d }).collect();
    write_json(out, "diagnostics.json", &rows)
}

fn predict(out: &Path, a: &HistoricalAnalysis) -> Result<(), CliError> {
    let mut csv = String::from("measure,horizon,correlation\n");
    for (m, h, c) in a.predictive_table(&[1, 10])? {
        csv.push_str(&format!("{m},{h},{c}\n"));
    }
    write(out, "predictive_correlations.csv", &csv)
}

fn scenarios(a: &HistoricalAnalysis) -> [(&'static str, f64); 2] {
    [("h", a.bubble.h), ("current", a.bubble_now())]
}

fn ruin(out: &Path, a: &HistoricalAnalysis, config: &Config, seed: u64) -> Result<(), CliError> {
    let model = a.bubble_spec();
    let growth = a.derived.real_growth();
    for (label, b0) in scenarios(a) {
        let cfg = RuinConfig {
            model: model.clone(),
            b0,
            horizons: config.ruin.horizons.clone(),
            withdrawal_grid: config.ruin.rates.clone(),
            n_sims: config.ruin.n_sims,
            master_seed: seed,
            growth_history: growth.clone(),
        };
        let surface = ruin_surface(&cfg)?;
        write(out, &format!("ruin_surface_b0={label}.csv"), &surface.to_csv())?;
    }
    Ok(())
}

fn riskfree(raw: &RawMarketTable, config: &Config) -> Result<Vec<f64>, CliError> {
    let rates = match &config.rates {
        Some(p) => {
            let bytes =
                std::fs::read(p).map_err(|e| CliError::input("InputUnreadable", format!("{}: {e}", p.display())))?;
            parse_rate_csv(&bytes)?
        }
        None => bundled_rates(),
    };
    Ok(real_riskfree(raw, &rates, config.window)?)
}

fn portfolio(out: &Path, raw: &RawMarketTable, a: &HistoricalAnalysis, config: &Config, seed: u64) -> Result<(), CliError> {
    let rf = riskfree(raw, config)?;
    let growth = a.derived.real_growth();
    let settings = &config.portfolio;
    for (label, b0) in scenarios(a) {
        let mut csv = String::new();
        for &horizon in &settings.horizons {
            let cfg = PortfolioRuleConfig {
                gamma_grid: settings.gamma_grid.clone(),
                withdrawal_rate: settings.withdrawal_rate,
                horizon,
                riskfree_series: rf.clone(),
                model: a.bubble_spec(),
                b0,
                n_sims: settings.n_sims,
                master_seed: seed,
                growth_history: growth.clone(),
                mode: settings.mode,
                clamp: settings.clamp,
            };
            let res = portfolio_ruin(&cfg)?;
            let part = portfolio_ruin_csv(&cfg, &res);
            if csv.is_empty() {
                csv.push_str(&part);
            } else {
                csv.push_str(part.split_once('\n').map_or("", |x| x.1));
            }
        }
        write(out, &format!("portfolio_ruin_b0={label}.csv"), &csv)?;
    }
    Ok(())
}

/// Continuous-time analogue of the fitted bubble model.
fn ct_spec(raw: &RawMarketTable, a: &HistoricalAnalysis, config: &Config) -> Result<CtModelSpec, CliError> {
    let growth = a.derived.real_growth();
    let rf = riskfree(raw, config)?;
    Ok(CtModelSpec {
        drift: Drift::LinearOu { beta_rev: 1.0 - a.bubble.beta_h, h_inf: a.bubble.h },
        sigma: a.bubble.sigma_eps,
        g: mean(&growth),
        rho: std_dev(&growth),
        c: a.bubble.c,
        r: RiskFree::Constant(mean(&rf)),
    })
}

fn ctsim(out: &Path, raw: &RawMarketTable, a: &HistoricalAnalysis, config: &Config, seed: u64) -> Result<(), CliError> {
    let s = &config.ctsim;
    let spec = ct_spec(raw, a, config)?;
    let path = simulate_optimal_path(&spec, s.gamma, a.bubble_now(), s.dt, s.horizon, seed)?;
    write(out, "ct_path.csv", &path.to_csv())?;
    let grid = ThetaGrid::around_stationary(&spec, s.half_width_sd, s.n_h, s.horizon, s.n_t)?;
    let pde = solve_terminal_pde_with(&spec, s.gamma, &grid, s.bracket)?;
    write(out, "theta_pde.csv", &pde.to_csv())?;
    let ode = solve_consumption_ode_with(&spec, s.gamma, s.discount_rate, &grid, s.bracket)?;
    write(out, "theta_ode.csv", &ode.to_csv())
}

#[derive(Serialize)]
struct Report {
    n_checks: usize,
    n_pass: usize,
    checks: Vec<valuation_lab::report::GoldenCheck>,
}

fn report(out: &Path, a: &HistoricalAnalysis) -> Result<(), CliError> {
    let checks = golden_checks(a)?;
    let n_pass = checks.iter().filter(|c| c.pass).count();
    write_json(out, "report.json", &Report { n_checks: checks.len(), n_pass, checks })
}
