//! Size caps guarding dense and combinatorial allocations.

/// Environment variable overriding [`Caps::dense_entries`].
pub const DENSE_CAP_ENV: &str = "MAXNORM_DENSE_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest dense matrix or tensor (entries) that is materialised.
    pub dense_entries: u128,
    /// Largest Khatri-Rao width handed to the matrix sketch.
    pub khatri_rao_width: u128,
    /// Largest CP width produced by an exact tensor Hadamard power.
    pub cp_power_width: u128,
    /// Largest multi-index basis enumerated.
    pub multiindex_terms: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            dense_entries: 1 << 24,
            khatri_rao_width: 1 << 20,
            cp_power_width: 1 << 16,
            multiindex_terms: 100_000,
        }
    }
}

impl Caps {
    /// Defaults, with the dense cap taken from `MAXNORM_DENSE_CAP` when set.
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        if let Some(v) = std::env::var(DENSE_CAP_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            caps.dense_entries = v;
        }
        caps
    }

    pub(crate) fn check_dense(&self, what: &str, entries: u128) -> crate::Result<()> {
        if entries > self.dense_entries {
            return Err(crate::Error::CapExceeded {
                what: what.to_string(),
                size: entries,
                cap: self.dense_entries,
            });
        }
        Ok(())
    }
}
