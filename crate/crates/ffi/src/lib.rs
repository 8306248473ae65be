//! C ABI for `market_asymptotics`.
//!
//! Every function returns an [`MaStatus`]. On failure a message is available from
//! [`ma_last_error_message`] on the calling thread. Handles are opaque and must be
//! released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use market_asymptotics::asymptotics::gaussian_approx;
use market_asymptotics::closed_form::{closed_form_params, HypergeometricLaw};
use market_asymptotics::distributions::{make_power, make_uniform, SharedDistribution};
use market_asymptotics::market::{efficient_outcome, MarketSpec, Realization};
use market_asymptotics::montecarlo::{run_simulation, SimulationConfig, SimulationReport};
use market_asymptotics::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericFailure = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaLawFamily {
    /// Uniform on `[param1, param2]`.
    Uniform = 0,
    /// `F(x) = x^param1` on `[0, 1]`; `param2` is ignored.
    Power = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MaLawSpec {
    pub family: MaLawFamily,
    pub param1: f64,
    pub param2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MaGaussianApprox {
    pub t_alpha: f64,
    pub mean_k: f64,
    pub mean_w: f64,
    pub var_k: f64,
    pub var_w: f64,
    pub cov_kw: f64,
    pub sigma2: f64,
    pub varsigma2: f64,
    pub kappa: f64,
    pub correlation: f64,
    pub e_prime: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MaOutcome {
    pub quantity: usize,
    pub welfare: f64,
    /// Zero when nobody trades; the prices are then NaN.
    pub has_prices: i32,
    pub buyer_price: f64,
    pub seller_price: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MaClosedForm {
    pub t_alpha: f64,
    pub sigma2: f64,
    pub mean_w_unit: f64,
    pub varsigma2: f64,
    pub kappa: f64,
}

/// Market specification handle.
pub struct MaMarket {
    spec: MarketSpec,
}

/// Simulation result handle.
pub struct MaSimulation {
    report: SimulationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MaStatus, msg: impl Into<String>) -> MaStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> MaStatus {
    let status = if e.is_config_error() {
        MaStatus::InvalidArgument
    } else {
        MaStatus::NumericFailure
    };
    fail(status, e.to_string())
}

fn guard<F: FnOnce() -> MaStatus>(f: F) -> MaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(MaStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn build_law(spec: &MaLawSpec) -> Result<SharedDistribution, Error> {
    match spec.family {
        MaLawFamily::Uniform => make_uniform(spec.param1, spec.param2),
        MaLawFamily::Power => make_power(spec.param1),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer stays valid
/// until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ma_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `buyer_law` and `seller_law` must point to valid specs; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ma_market_new(
    n_buyers: usize,
    n_sellers: usize,
    buyer_law: *const MaLawSpec,
    seller_law: *const MaLawSpec,
    out: *mut *mut MaMarket,
) -> MaStatus {
    guard(|| {
        if buyer_law.is_null() || seller_law.is_null() || out.is_null() {
            return fail(MaStatus::NullPointer, "null argument to ma_market_new");
        }
        let built = build_law(&*buyer_law).and_then(|f| {
            let g = build_law(&*seller_law)?;
            MarketSpec::new(n_buyers, n_sellers, f, g)
        });
        match built {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(MaMarket { spec }));
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `market` must come from `ma_market_new` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ma_market_free(market: *mut MaMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// # Safety
/// `market` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ma_market_gaussian_approx(
    market: *const MaMarket,
    out: *mut MaGaussianApprox,
) -> MaStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return fail(
                MaStatus::NullPointer,
                "null argument to ma_market_gaussian_approx",
            );
        }
        match gaussian_approx(&(*market).spec) {
            Ok(a) => {
                *out = MaGaussianApprox {
                    t_alpha: a.t_alpha,
                    mean_k: a.mean_k,
                    mean_w: a.mean_w,
                    var_k: a.var_k,
                    var_w: a.var_w,
                    cov_kw: a.cov_kw,
                    sigma2: a.sigma2,
                    varsigma2: a.varsigma2,
                    kappa: a.kappa,
                    correlation: a.correlation(),
                    e_prime: a.e_prime_at_t,
                };
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

/// Efficient outcome of one realization. Prices use no support bounds.
///
/// # Safety
/// `values` and `costs` must point to `n_values` and `n_costs` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ma_efficient_outcome(
    values: *const f64,
    n_values: usize,
    costs: *const f64,
    n_costs: usize,
    out: *mut MaOutcome,
) -> MaStatus {
    guard(|| {
        let (Some(v), Some(c)) = (slice(values, n_values), slice(costs, n_costs)) else {
            return fail(MaStatus::NullPointer, "null array in ma_efficient_outcome");
        };
        if out.is_null() {
            return fail(MaStatus::NullPointer, "null out in ma_efficient_outcome");
        }
        match efficient_outcome(&Realization::new(v.to_vec(), c.to_vec())) {
            Ok(o) => {
                *out = MaOutcome {
                    quantity: o.quantity,
                    welfare: o.welfare,
                    has_prices: i32::from(o.buyer_price.is_some()),
                    buyer_price: o.buyer_price.unwrap_or(f64::NAN),
                    seller_price: o.seller_price.unwrap_or(f64::NAN),
                };
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ma_closed_form_params(lambda: f64, out: *mut MaClosedForm) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return fail(MaStatus::NullPointer, "null out in ma_closed_form_params");
        }
        match closed_form_params(lambda) {
            Ok(p) => {
                *out = MaClosedForm {
                    t_alpha: p.t_alpha,
                    sigma2: p.sigma2,
                    mean_w_unit: p.mean_w_unit,
                    varsigma2: p.varsigma2,
                    kappa: p.kappa,
                };
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `P(K = k)` for equal buyer and seller laws.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ma_hypergeometric_pmf(
    n_buyers: u64,
    n_sellers: u64,
    k: u64,
    out: *mut f64,
) -> MaStatus {
    guard(|| {
        if out.is_null() {
            return fail(MaStatus::NullPointer, "null out in ma_hypergeometric_pmf");
        }
        match HypergeometricLaw::new(n_buyers, n_sellers) {
            Ok(law) => {
                *out = law.pmf(k);
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs `replications` seeded replications on `workers` threads (0 = all cores).
///
/// # Safety
/// `market` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ma_simulation_run(
    market: *const MaMarket,
    replications: usize,
    seed: u64,
    workers: usize,
    out: *mut *mut MaSimulation,
) -> MaStatus {
    guard(|| {
        if market.is_null() || out.is_null() {
            return fail(MaStatus::NullPointer, "null argument to ma_simulation_run");
        }
        let run = SimulationConfig::new((*market).spec.clone(), replications, seed)
            .and_then(|cfg| run_simulation(&cfg, workers));
        match run {
            Ok(report) => {
                *out = Box::into_raw(Box::new(MaSimulation { report }));
                MaStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of records, or 0 for NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ma_simulation_len(sim: *const MaSimulation) -> usize {
    if sim.is_null() {
        0
    } else {
        (*sim).report.records.len()
    }
}

/// Copies `K` and `W` of every replication into caller buffers of `capacity` entries.
///
/// # Safety
/// `sim` must be a live handle; both buffers must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn ma_simulation_records(
    sim: *const MaSimulation,
    quantities: *mut usize,
    welfare: *mut f64,
    capacity: usize,
) -> MaStatus {
    guard(|| {
        if sim.is_null() || quantities.is_null() || welfare.is_null() {
            return fail(
                MaStatus::NullPointer,
                "null argument to ma_simulation_records",
            );
        }
        let records = &(*sim).report.records;
        if capacity < records.len() {
            return fail(
                MaStatus::BufferTooSmall,
                format!("need {} entries, buffer holds {capacity}", records.len()),
            );
        }
        let q = std::slice::from_raw_parts_mut(quantities, records.len());
        let w = std::slice::from_raw_parts_mut(welfare, records.len());
        for (i, r) in records.iter().enumerate() {
            q[i] = r.quantity;
            w[i] = r.welfare;
        }
        MaStatus::Ok
    })
}

/// # Safety
/// `sim` must come from `ma_simulation_run` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ma_simulation_free(sim: *mut MaSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
