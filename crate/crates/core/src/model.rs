//! A scene together with its physical channel and pilots: the fixed inputs
//! shared by every bound evaluation.

use crate::error::Result;
use crate::scene::{scene_paths, shift_params, LocationVector, Numerology, PathParams, Scene, ShiftPair};
use crate::waveform::{pilots, snr_to_sigma, PilotSet};

#[derive(Debug, Clone)]
pub struct LinkModel {
    pub scene: Scene,
    pub numerology: Numerology,
    /// Physical channel with free-space gains, LOS first.
    pub true_paths: PathParams,
    pub pilots: PilotSet,
    pub reflection_loss: f64,
}

impl LinkModel {
    pub fn new(scene: Scene, reflection_loss: f64, pilot_seed: u64) -> Result<Self> {
        scene.validate()?;
        let numerology = scene.numerology();
        let true_paths = scene_paths(&scene, reflection_loss)?;
        let pilots = pilots(scene.n_symbols, scene.n_subcarriers, scene.n_tx, pilot_seed);
        Ok(LinkModel { scene, numerology, true_paths, pilots, reflection_loss })
    }

    /// Reference scene, unit reflection loss.
    pub fn reference(pilot_seed: u64) -> Self {
        Self::new(Scene::reference(), 1.0, pilot_seed).expect("reference scene is valid")
    }

    pub fn n_paths(&self) -> usize {
        self.true_paths.len()
    }

    pub fn true_locations(&self) -> LocationVector {
        self.scene.true_locations()
    }

    /// Parameters of the virtual channel an unaware receiver observes.
    pub fn shifted_paths(&self, shift: ShiftPair) -> PathParams {
        shift_params(&self.true_paths, shift, self.numerology.delay_span())
    }

    pub fn sigma_for_snr(&self, shift: ShiftPair, snr_db: f64) -> Result<f64> {
        snr_to_sigma(&self.true_paths, shift, &self.pilots, &self.numerology, snr_db)
    }
}
