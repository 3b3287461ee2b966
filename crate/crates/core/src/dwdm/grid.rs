use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in nm * THz, so `lambda[nm] = C / f[THz]`.
pub const SPEED_OF_LIGHT_NM_THZ: f64 = 299_792.458;

/// Channel `n` sits at `190.0 THz + n * 100 GHz`.
pub const GRID_ORIGIN_GHZ: i64 = 190_000;
pub const GRID_SPACING_GHZ: i64 = 100;

/// Supported channel numbers: 184.5 THz .. 196.1 THz (about 1529-1625 nm).
pub const MIN_CHANNEL: i32 = -55;
pub const MAX_CHANNEL: i32 = 61;

/// Channel-number sum of the anti-correlated pairs around 1560 nm.
pub const DEFAULT_PAIR_SUM: i32 = 43;

/// A 100 GHz ITU grid channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct ItuChannel(i32);

impl TryFrom<i32> for ItuChannel {
    type Error = Error;

    fn try_from(n: i32) -> Result<Self> {
        Self::new(n)
    }
}

impl From<ItuChannel> for i32 {
    fn from(c: ItuChannel) -> i32 {
        c.0
    }
}

impl ItuChannel {
    pub fn new(number: i32) -> Result<Self> {
        if !(MIN_CHANNEL..=MAX_CHANNEL).contains(&number) {
            return Err(Error::OutOfGrid(number));
        }
        Ok(Self(number))
    }

    pub fn number(&self) -> i32 {
        self.0
    }

    /// Exact center frequency in GHz.
    pub fn frequency_ghz(&self) -> i64 {
        GRID_ORIGIN_GHZ + GRID_SPACING_GHZ * self.0 as i64
    }

    pub fn frequency_thz(&self) -> f64 {
        self.frequency_ghz() as f64 / 1000.0
    }

    /// Vacuum wavelength of the channel center, nm.
    pub fn wavelength_nm(&self) -> f64 {
        SPEED_OF_LIGHT_NM_THZ / self.frequency_thz()
    }

    /// Passband edges in wavelength, `(short, long)`, nm.
    pub fn band_nm(&self) -> (f64, f64) {
        let half = GRID_SPACING_GHZ as f64 / 2000.0;
        let f = self.frequency_thz();
        (SPEED_OF_LIGHT_NM_THZ / (f + half), SPEED_OF_LIGHT_NM_THZ / (f - half))
    }

    /// Nearest grid channel to a frequency; fails when off-grid by more than
    /// 1 MHz or outside the supported range.
    pub fn from_frequency_thz(f: f64) -> Result<Self> {
        let n = (f * 1000.0 - GRID_ORIGIN_GHZ as f64) / GRID_SPACING_GHZ as f64;
        let rounded = n.round();
        if (n - rounded).abs() * GRID_SPACING_GHZ as f64 > 1e-3 || !rounded.is_finite() {
            return Err(Error::InvalidParameter {
                name: "frequency",
                reason: format!("{f} THz is not on the 100 GHz grid"),
            });
        }
        Self::new(rounded as i32)
    }

    pub fn from_wavelength_nm(lambda: f64) -> Result<Self> {
        Self::from_frequency_thz(SPEED_OF_LIGHT_NM_THZ / lambda)
    }
}

/// Energy-conserving signal/idler channel pair. The signal is the longer
/// wavelength (lower frequency) member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelPair {
    pub signal: ItuChannel,
    pub idler: ItuChannel,
}

/// The pair containing channel `n` whose channel numbers sum to `pair_sum`.
pub fn pair_for(n: i32, pair_sum: i32) -> Result<ChannelPair> {
    let a = ItuChannel::new(n)?;
    let b = ItuChannel::new(pair_sum - n)?;
    if a == b {
        return Err(Error::InvalidParameter {
            name: "channel",
            reason: format!("channel {n} is its own partner"),
        });
    }
    let (signal, idler) = if a < b { (a, b) } else { (b, a) };
    Ok(ChannelPair { signal, idler })
}

impl ChannelPair {
    pub fn label(&self) -> String {
        format!("ITU{}-{}", self.signal.number(), self.idler.number())
    }

    pub fn pair_sum(&self) -> i32 {
        self.signal.number() + self.idler.number()
    }

    /// `f_s + f_i` in GHz; equals the pump frequency.
    pub fn frequency_sum_ghz(&self) -> i64 {
        self.signal.frequency_ghz() + self.idler.frequency_ghz()
    }

    pub fn pump_frequency_thz(&self) -> f64 {
        self.frequency_sum_ghz() as f64 / 1000.0
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        SPEED_OF_LIGHT_NM_THZ / self.pump_frequency_thz()
    }

    /// Wavelength of the degenerate point `2 / (1/lambda_s + 1/lambda_i)`.
    pub fn degenerate_wavelength_nm(&self) -> f64 {
        2.0 * SPEED_OF_LIGHT_NM_THZ / self.pump_frequency_thz()
    }

    /// `1/lambda_p - 1/lambda_s - 1/lambda_i` in nm^-1.
    pub fn energy_conservation_residual(&self) -> f64 {
        1.0 / self.pump_wavelength_nm() - 1.0 / self.signal.wavelength_nm() - 1.0 / self.idler.wavelength_nm()
    }
}

/// The five demultiplexed pairs ITU10-33 .. ITU14-29.
pub fn standard_pairs() -> Vec<ChannelPair> {
    (10..=14)
        .map(|n| pair_for(n, DEFAULT_PAIR_SUM).expect("in grid"))
        .collect()
}
