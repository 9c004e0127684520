use crate::error::{Error, Result};

/// Geometry and layer sizes of the three networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// patches per series
    pub t: usize,
    /// steps per patch
    pub p: usize,
    /// channels
    pub c: usize,
    pub latent_dim: usize,
    pub enc_layers: usize,
    pub enc_hidden: usize,
    pub dec_layers: usize,
    pub dec_hidden: usize,
    /// hidden dense layers of the interpolator; a linear output layer follows
    pub interp_layers: usize,
    pub interp_hidden: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Defaults for a given grid: 2-layer GRUs of width 24, latent width 8,
    /// and two interpolator layers of width `4 * t * latent_dim`.
    pub fn new(t: usize, p: usize, c: usize) -> Self {
        let latent_dim = 8;
        ModelConfig {
            t,
            p,
            c,
            latent_dim,
            enc_layers: 2,
            enc_hidden: 24,
            dec_layers: 2,
            dec_hidden: 24,
            interp_layers: 2,
            interp_hidden: 4 * t * latent_dim,
            seed: 0,
        }
    }

    pub fn patch_width(&self) -> usize {
        self.p * self.c
    }

    pub fn series_len(&self) -> usize {
        self.t * self.p
    }

    /// Width of the interpolator input: flattened codes plus indicator.
    pub fn interp_input(&self) -> usize {
        self.t * (self.latent_dim + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("t", self.t),
            ("p", self.p),
            ("c", self.c),
            ("latent_dim", self.latent_dim),
            ("enc_layers", self.enc_layers),
            ("enc_hidden", self.enc_hidden),
            ("dec_layers", self.dec_layers),
            ("dec_hidden", self.dec_hidden),
            ("interp_layers", self.interp_layers),
            ("interp_hidden", self.interp_hidden),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.latent_dim > self.enc_hidden {
            return Err(Error::Config(format!(
                "latent_dim {} exceeds encoder hidden width {}",
                self.latent_dim, self.enc_hidden
            )));
        }
        Ok(())
    }
}
