//! Unified path sampling over every supported process.
//!
//! `PathSampler` does the per-grid preparation (covariance factorization,
//! chaos-kernel assembly, vector-field catalog lookup) once, so that replica
//! loops only pay the per-path cost.

use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianSampler, SamplingMethod};
use crate::grid::TimeGrid;
use crate::process::{ProcessClass, ProcessSpec, SamplePath, SdeScheme};
use crate::rng::RngStream;
use crate::rosenblatt::ChaosKernel;
use crate::sde::{self, VectorFieldSet};

enum Backend {
    Gaussian(GaussianSampler),
    Rosenblatt(ChaosKernel),
    Sde {
        driver: GaussianSampler,
        fields: VectorFieldSet,
        x0: Vec<f64>,
        scheme: SdeScheme,
        hurst: f64,
    },
}

pub struct PathSampler {
    spec: ProcessSpec,
    grid: TimeGrid,
    backend: Backend,
}

impl PathSampler {
    pub fn new(spec: &ProcessSpec, grid: TimeGrid) -> Result<Self> {
        spec.validate()?;
        let backend = match &spec.class {
            ProcessClass::Fbm { .. } | ProcessClass::GaussianQuasiHelix { .. } => {
                let cov = Covariance::from_process(&spec.class).ok_or_else(|| {
                    Error::InvalidParameter("process has no Gaussian covariance".into())
                })?;
                Backend::Gaussian(GaussianSampler::new(
                    &cov,
                    spec.dim,
                    grid,
                    SamplingMethod::Auto,
                )?)
            }
            ProcessClass::Rosenblatt { hurst, rank } => {
                Backend::Rosenblatt(ChaosKernel::build(*hurst, grid, *rank)?)
            }
            ProcessClass::FbmSde {
                hurst,
                scheme,
                field,
                x0,
            } => Backend::Sde {
                driver: GaussianSampler::new(
                    &Covariance::fbm(*hurst)?,
                    spec.dim,
                    grid,
                    SamplingMethod::Auto,
                )?,
                fields: VectorFieldSet::from_catalog(*field),
                x0: vec![*x0; spec.dim],
                scheme: *scheme,
                hurst: *hurst,
            },
        };
        Ok(Self {
            spec: spec.clone(),
            grid,
            backend,
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<SamplePath> {
        match &self.backend {
            Backend::Gaussian(s) => Ok(s.sample(rng)),
            Backend::Rosenblatt(k) => Ok(k.sample(rng)),
            Backend::Sde {
                driver,
                fields,
                x0,
                scheme,
                hurst,
            } => {
                let b = driver.sample(rng);
                Ok(sde::solve_sde(fields, x0, &b, *scheme, *hurst)?.path)
            }
        }
    }
}
