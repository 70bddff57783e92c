use std::fmt;

use fspd_core::error::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Usage = 1,
    Domain = 2,
    NoConvergence = 3,
    Io = 4,
}

#[derive(Debug)]
pub enum Failure {
    Model(Error),
    Usage(String),
    Io(String),
}

impl Failure {
    pub fn exit(&self) -> Exit {
        match self {
            Failure::Model(e) => exit_for(e),
            Failure::Usage(_) => Exit::Usage,
            Failure::Io(_) => Exit::Io,
        }
    }
}

pub fn exit_for(e: &Error) -> Exit {
    if e.is_domain() {
        Exit::Domain
    } else {
        Exit::NoConvergence
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Machine-readable number: 12 significant digits, shortest form.
pub fn num(x: f64) -> String {
    let r = sig12(x);
    if r != 0.0 && (r.abs() < 1e-6 || r.abs() >= 1e15) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Human-readable number: 3 decimals.
pub fn text(x: f64) -> String {
    format!("{x:.3}")
}
