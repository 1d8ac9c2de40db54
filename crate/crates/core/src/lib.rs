//! Coupled energy-market toolkit: linear programming with dual certificates,
//! DC optimal power flow, steady-state optimal gas flow, market-power
//! monitoring, and cross-market bidding search for gas-fired generator fleets.

pub mod coupling;
pub mod gas;
pub mod linalg;
pub mod lp;
pub mod monitor;
pub mod power;
pub mod scenario;
pub mod testkit;
pub mod units;

/// Execution strategy for data-parallel inner loops (grid enumeration,
/// pattern-search polls). `Rayon` requires the `parallel` feature; the
/// sequential path is always available and produces identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Rayon,
}

impl Default for Parallelism {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Rayon
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

pub(crate) fn map_indexed<T: Send, F: Fn(usize) -> T + Sync + Send>(
    n: usize,
    par: Parallelism,
    f: F,
) -> Vec<T> {
    match par {
        Parallelism::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Rayon => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}
