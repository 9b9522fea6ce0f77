use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of a hyperparameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub conv_layers: usize,
    pub learning_rate: f64,
    pub filters: usize,
    pub filter_size: usize,
    /// Widths of the hidden fully connected layers, strictly decreasing.
    /// The 10-way output layer is not included.
    pub hidden_units: Vec<usize>,
    pub batch_size: usize,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::invalid("network config", reason));
        if self.conv_layers == 0 {
            return bad("conv_layers must be >= 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate {} is not positive", self.learning_rate));
        }
        if self.filters == 0 || self.filter_size == 0 || self.batch_size == 0 {
            return bad("filters, filter_size and batch_size must be positive".into());
        }
        if self.hidden_units.is_empty() || self.hidden_units.contains(&0) {
            return bad("hidden_units must be non-empty and positive".into());
        }
        if self.hidden_units.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!("hidden_units {:?} not strictly decreasing", self.hidden_units));
        }
        Ok(())
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden_units.len()
    }

    pub fn id(&self) -> ConfigId {
        ConfigId::from(self)
    }

    /// The same configuration with a different number of conv layers.
    pub fn with_conv_layers(&self, conv_layers: usize) -> NetworkConfig {
        NetworkConfig {
            conv_layers,
            ..self.clone()
        }
    }

    /// `#convLayers, learningRate, #filters, filterSize, #hiddenLayers, [units], batchSize`,
    /// e.g. `3, 0.001, 48, 3, 2, [500,50], 30`.
    pub fn nomenclature(&self) -> String {
        format!(
            "{}, {}, {}, {}, {}, [{}], {}",
            self.conv_layers,
            self.learning_rate,
            self.filters,
            self.filter_size,
            self.hidden_layers(),
            join(&self.hidden_units, ","),
            self.batch_size
        )
    }
}

fn join(values: &[usize], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

/// Canonical, filename-safe encoding of all seven hyperparameters, e.g.
/// `c3_lr0.001_f48_k3_h2_u500-50_b30`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigId(String);

impl ConfigId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parse_config(&self) -> Result<NetworkConfig> {
        self.0.parse()
    }
}

impl From<&NetworkConfig> for ConfigId {
    fn from(c: &NetworkConfig) -> Self {
        ConfigId(format!(
            "c{}_lr{}_f{}_k{}_h{}_u{}_b{}",
            c.conv_layers,
            c.learning_rate,
            c.filters,
            c.filter_size,
            c.hidden_layers(),
            join(&c.hidden_units, "-"),
            c.batch_size
        ))
    }
}

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ConfigId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let config: NetworkConfig = s.parse()?;
        Ok(config.id())
    }
}

impl FromStr for NetworkConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            what: "config id",
            input: s.to_string(),
        };
        let parts: Vec<&str> = s.split('_').collect();
        let [c, lr, f, k, h, u, b] = parts.as_slice() else {
            return Err(err());
        };
        let field = |part: &str, prefix: &str| part.strip_prefix(prefix).map(str::to_owned).ok_or_else(err);
        let int = |part: &str, prefix: &str| field(part, prefix)?.parse::<usize>().map_err(|_| err());
        let hidden_units = field(u, "u")?
            .split('-')
            .map(|v| v.parse::<usize>().map_err(|_| err()))
            .collect::<Result<Vec<_>>>()?;
        let config = NetworkConfig {
            conv_layers: int(c, "c")?,
            learning_rate: field(lr, "lr")?.parse().map_err(|_| err())?,
            filters: int(f, "f")?,
            filter_size: int(k, "k")?,
            hidden_units,
            batch_size: int(b, "b")?,
        };
        if int(h, "h")? != config.hidden_layers() {
            return Err(err());
        }
        config.validate()?;
        // Reject non-canonical spellings such as `lr1e-3` so ids stay bijective.
        if config.id().as_str() != s {
            return Err(err());
        }
        Ok(config)
    }
}

/// Short architecture label `CNN_<conv layers>_<fc layers>_<reused layers>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConfigName {
    pub conv_layers: usize,
    pub fc_layers: usize,
    pub reused: usize,
}

/// Names a configuration trained with its first `reused` conv layers reused.
pub fn config_name(config: &NetworkConfig, reused: usize) -> Result<ConfigName> {
    ConfigName::new(config.conv_layers, config.hidden_layers(), reused)
}

impl ConfigName {
    pub fn new(conv_layers: usize, fc_layers: usize, reused: usize) -> Result<Self> {
        if conv_layers == 0 || fc_layers == 0 || reused >= conv_layers {
            return Err(Error::invalid(
                "config name",
                format!("need conv >= 1, fc >= 1 and reused < conv, got {conv_layers}/{fc_layers}/{reused}"),
            ));
        }
        Ok(ConfigName {
            conv_layers,
            fc_layers,
            reused,
        })
    }
}

impl fmt::Display for ConfigName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CNN_{}_{}_{}", self.conv_layers, self.fc_layers, self.reused)
    }
}

impl FromStr for ConfigName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            what: "CNN_<ncl>_<nfcl>_<nrl> name",
            input: s.to_string(),
        };
        let rest = s.strip_prefix("CNN_").ok_or_else(err)?;
        let nums = rest
            .split('_')
            .map(|p| p.parse::<usize>().map_err(|_| err()))
            .collect::<Result<Vec<_>>>()?;
        let [ncl, nfcl, nrl] = nums.as_slice() else {
            return Err(err());
        };
        ConfigName::new(*ncl, *nfcl, *nrl)
    }
}
