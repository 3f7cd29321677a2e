//! C ABI for driving single simulation paths from other languages.
//!
//! The interface follows the opaque-handle pattern: `schns_sim_new` parses a
//! configuration string and returns a pointer that owns the full solver
//! state; every other call takes that pointer. Functions return an error
//! code (`SCHNS_OK` = 0) and the last error message is retrievable per
//! thread via `schns_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use schns::config::parse_config;
use schns::diagnostics::energy;
use schns::dynamics::{RngSource, State, Stepper};
use schns::noise::{path_rng, ChaCha12Rng, NoiseModel};

/// Error codes returned by the C interface.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchnsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    StepFailed = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Field selectors for `schns_sim_field`.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchnsField {
    Phi = 0,
    Ux = 1,
    Uy = 2,
    Mu = 3,
}

/// Energy components of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SchnsEnergy {
    pub total: f64,
    pub kinetic: f64,
    pub gradient_bulk: f64,
    pub boundary_l2: f64,
    pub boundary_grad: f64,
    pub bulk_potential: f64,
    pub boundary_potential: f64,
    pub dissipation: f64,
    pub mass: f64,
    pub t: f64,
}

/// Opaque simulation handle.
pub struct SchnsSim {
    stepper: Stepper,
    state: State,
    rng: ChaCha12Rng,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn schns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Build a simulation from a configuration string (same format as the CLI
/// config file; pass an empty string for the defaults). `path_index`
/// selects the RNG stream so callers can drive ensembles. Returns null on
/// failure; see `schns_last_error`.
///
/// # Safety
/// `config_text` must be a valid NUL-terminated C string (or null for
/// defaults).
#[no_mangle]
pub unsafe extern "C" fn schns_sim_new(
    config_text: *const c_char,
    path_index: u64,
) -> *mut SchnsSim {
    let result = catch_unwind(|| {
        let text = if config_text.is_null() {
            String::new()
        } else {
            match CStr::from_ptr(config_text).to_str() {
                Ok(s) => s.to_string(),
                Err(_) => {
                    set_error("config text is not valid UTF-8");
                    return std::ptr::null_mut();
                }
            }
        };
        let cfg = match parse_config(&text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return std::ptr::null_mut();
            }
        };
        let build = || -> schns::error::Result<SchnsSim> {
            let grid = cfg.build_grid()?;
            let potentials = cfg.build_potentials()?;
            let noise = if cfg.noise.enabled {
                Some(NoiseModel::build(&grid, &cfg.noise.params)?)
            } else {
                None
            };
            let stepper = Stepper::new(grid, cfg.scheme.clone(), potentials, noise)?;
            let (u0, phi0) = schns::init::build(&stepper.grid, &cfg.init);
            let state = stepper.initial_state(&u0, &phi0)?;
            let rng = path_rng(cfg.base_seed, path_index);
            Ok(SchnsSim {
                stepper,
                state,
                rng,
            })
        };
        match build() {
            Ok(sim) => Box::into_raw(Box::new(sim)),
            Err(e) => {
                set_error(&e.to_string());
                std::ptr::null_mut()
            }
        }
    });
    result.unwrap_or_else(|_| {
        set_error("internal panic during construction");
        std::ptr::null_mut()
    })
}

/// Advance the simulation by `n_steps` time steps.
///
/// # Safety
/// `sim` must be a live pointer from `schns_sim_new`.
#[no_mangle]
pub unsafe extern "C" fn schns_sim_step(sim: *mut SchnsSim, n_steps: u64) -> SchnsStatus {
    let Some(sim) = sim.as_mut() else {
        set_error("null simulation handle");
        return SchnsStatus::NullPointer;
    };
    let out = catch_unwind(AssertUnwindSafe(|| {
        for _ in 0..n_steps {
            let mut source = RngSource { rng: &mut sim.rng };
            if let Err(e) = sim.stepper.full_step(&mut sim.state, &mut source) {
                set_error(&e.to_string());
                return SchnsStatus::StepFailed;
            }
        }
        SchnsStatus::Ok
    }));
    out.unwrap_or_else(|_| {
        set_error("internal panic during stepping");
        SchnsStatus::Panic
    })
}

/// Current simulation time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be a live pointer from `schns_sim_new` (or null).
#[no_mangle]
pub unsafe extern "C" fn schns_sim_time(sim: *const SchnsSim) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.state.t)
}

/// Grid dimensions of the simulation.
///
/// # Safety
/// `sim` must be live; `nx` and `ny` must point to writable u32 slots.
#[no_mangle]
pub unsafe extern "C" fn schns_sim_grid(
    sim: *const SchnsSim,
    nx: *mut u32,
    ny: *mut u32,
) -> SchnsStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("null simulation handle");
        return SchnsStatus::NullPointer;
    };
    if nx.is_null() || ny.is_null() {
        set_error("null output pointer");
        return SchnsStatus::NullPointer;
    }
    *nx = sim.stepper.grid.nx as u32;
    *ny = sim.stepper.grid.ny as u32;
    SchnsStatus::Ok
}

/// Energy report of the current state.
///
/// # Safety
/// `sim` must be live; `out` must point to a writable `SchnsEnergy`.
#[no_mangle]
pub unsafe extern "C" fn schns_sim_energy(
    sim: *const SchnsSim,
    out: *mut SchnsEnergy,
) -> SchnsStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("null simulation handle");
        return SchnsStatus::NullPointer;
    };
    if out.is_null() {
        set_error("null output pointer");
        return SchnsStatus::NullPointer;
    }
    let e = energy(
        &sim.stepper.grid,
        &sim.state,
        &sim.stepper.potentials,
        sim.stepper.params.epsilon,
        None,
    );
    *out = SchnsEnergy {
        total: e.total,
        kinetic: e.kinetic,
        gradient_bulk: e.gradient_bulk,
        boundary_l2: e.boundary_l2,
        boundary_grad: e.boundary_grad,
        bulk_potential: e.bulk_potential,
        boundary_potential: e.boundary_potential,
        dissipation: e.dissipation,
        mass: e.mass,
        t: e.t,
    };
    SchnsStatus::Ok
}

/// Copy a cell-centered field (row-major, nx * ny values) into `buf`.
///
/// # Safety
/// `sim` must be live; `buf` must point to at least `len` writable f64.
#[no_mangle]
pub unsafe extern "C" fn schns_sim_field(
    sim: *const SchnsSim,
    field: SchnsField,
    buf: *mut f64,
    len: usize,
) -> SchnsStatus {
    let Some(sim) = sim.as_ref() else {
        set_error("null simulation handle");
        return SchnsStatus::NullPointer;
    };
    if buf.is_null() {
        set_error("null buffer");
        return SchnsStatus::NullPointer;
    }
    let data: &[f64] = match field {
        SchnsField::Phi => &sim.state.phi.data,
        SchnsField::Ux => &sim.state.u.ux,
        SchnsField::Uy => &sim.state.u.uy,
        SchnsField::Mu => &sim.state.mu.data,
    };
    if len < data.len() {
        set_error("buffer too small");
        return SchnsStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
    SchnsStatus::Ok
}

/// Release a simulation handle. Passing null is a no-op.
///
/// # Safety
/// `sim` must be a pointer from `schns_sim_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn schns_sim_free(sim: *mut SchnsSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
