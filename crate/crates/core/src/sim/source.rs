use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distribution::{DistributionSpec, ScaledLaw};
use crate::error::Result;
use crate::model::SystemParams;

/// Primitive random streams driving one run. `None` means the stream is
/// exhausted; for arrivals this simply ends the arrival process.
pub trait PrimitiveSource {
    fn next_interarrival(&mut self) -> Option<f64>;
    fn patience(&mut self) -> Option<f64>;
    /// Drawn only when a service starts.
    fn service(&mut self) -> Option<f64>;
    fn initial_lead(&mut self, law: &DistributionSpec) -> Option<f64>;
}

const ARRIVAL_STREAM: u64 = 1;
const PATIENCE_STREAM: u64 = 2;
const SERVICE_STREAM: u64 = 3;
const INITIAL_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Renewal arrivals at rate `N λ`, i.i.d. services at rate `N μ` and
/// i.i.d. patience, each on its own ChaCha stream derived from the seed.
#[derive(Debug, Clone)]
pub struct RandomSource {
    arrival: ScaledLaw,
    service: ScaledLaw,
    patience: DistributionSpec,
    arrival_rng: ChaCha8Rng,
    patience_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    initial_rng: ChaCha8Rng,
}

impl RandomSource {
    /// `arrival_law` and `service_law` give the shape of the inter-arrival and
    /// service distributions; they are rescaled to means `1/(Nλ)` and `1/(Nμ)`.
    pub fn new(
        params: &SystemParams,
        arrival_law: DistributionSpec,
        service_law: DistributionSpec,
        patience_law: DistributionSpec,
    ) -> Result<Self> {
        params.validate()?;
        patience_law.validate()?;
        Ok(RandomSource {
            arrival: ScaledLaw::with_rate(arrival_law, params.scaled_arrival_rate())?,
            service: ScaledLaw::with_rate(service_law, params.scaled_service_rate())?,
            patience: patience_law,
            arrival_rng: stream(params.seed, ARRIVAL_STREAM),
            patience_rng: stream(params.seed, PATIENCE_STREAM),
            service_rng: stream(params.seed, SERVICE_STREAM),
            initial_rng: stream(params.seed, INITIAL_STREAM),
        })
    }
}

impl PrimitiveSource for RandomSource {
    fn next_interarrival(&mut self) -> Option<f64> {
        Some(self.arrival.sample(&mut self.arrival_rng))
    }

    fn patience(&mut self) -> Option<f64> {
        Some(self.patience.sample(&mut self.patience_rng))
    }

    fn service(&mut self) -> Option<f64> {
        Some(self.service.sample(&mut self.service_rng))
    }

    fn initial_lead(&mut self, law: &DistributionSpec) -> Option<f64> {
        Some(law.sample(&mut self.initial_rng))
    }
}

/// Fixed sequences, for hand-traced scenarios.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    interarrivals: VecDeque<f64>,
    patience: VecDeque<f64>,
    services: VecDeque<f64>,
    initial_leads: VecDeque<f64>,
}

impl ScriptedSource {
    pub fn new(interarrivals: Vec<f64>, patience: Vec<f64>, services: Vec<f64>) -> Self {
        ScriptedSource {
            interarrivals: interarrivals.into(),
            patience: patience.into(),
            services: services.into(),
            initial_leads: VecDeque::new(),
        }
    }

    pub fn with_initial_leads(mut self, leads: Vec<f64>) -> Self {
        self.initial_leads = leads.into();
        self
    }
}

impl PrimitiveSource for ScriptedSource {
    fn next_interarrival(&mut self) -> Option<f64> {
        self.interarrivals.pop_front()
    }

    fn patience(&mut self) -> Option<f64> {
        self.patience.pop_front()
    }

    fn service(&mut self) -> Option<f64> {
        self.services.pop_front()
    }

    fn initial_lead(&mut self, _law: &DistributionSpec) -> Option<f64> {
        self.initial_leads.pop_front()
    }
}
