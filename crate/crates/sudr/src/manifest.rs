//! Country manifest: population and observation window per country.
//!
//! ```toml
//! [countries.Austria]
//! population = 8847037
//! start = "2020-02-25"
//! end = "2020-04-24"
//! alpha = 0.01        # optional
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jhu::Window;

pub const DEFAULT_ALPHA: f64 = 0.01;

const BUILTIN: &str = r#"
[countries.Austria]
population = 8847037
start = "2020-02-25"
end = "2020-04-24"

[countries.Belgium]
population = 11422068
start = "2020-03-01"
end = "2020-04-29"

[countries.Denmark]
population = 5797446
start = "2020-02-27"
end = "2020-04-26"

[countries.France]
population = 66987244
start = "2020-02-25"
end = "2020-04-24"

[countries.Germany]
population = 82927922
start = "2020-01-27"
end = "2020-03-26"

[countries.Italy]
population = 60431283
start = "2020-02-20"
end = "2020-04-19"

[countries.Norway]
population = 5314336
start = "2020-02-26"
end = "2020-04-25"

[countries.Spain]
population = 46723749
start = "2020-02-25"
end = "2020-04-24"

[countries.Sweden]
population = 10183175
start = "2020-02-25"
end = "2020-04-24"

[countries.Switzerland]
population = 8516543
start = "2020-02-25"
end = "2020-04-24"

[countries."United Kingdom"]
population = 66488991
start = "2020-01-31"
end = "2020-03-30"
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountryEntry {
    pub population: f64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub alpha: Option<f64>,
}

impl CountryEntry {
    pub fn window(&self) -> Result<Window> {
        Window::new(self.start, self.end)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub countries: BTreeMap<String, CountryEntry>,
}

impl Manifest {
    /// The eleven European countries of the original study.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in manifest is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, entry) in &m.countries {
            if !(entry.population > 0.0 && entry.population.is_finite()) {
                return Err(Error::Config(format!("{name}: population must be positive")));
            }
            if let Some(a) = entry.alpha {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(Error::Config(format!("{name}: alpha must lie in (0, 1]")));
                }
            }
            entry.window()?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, country: &str) -> Result<&CountryEntry> {
        self.countries
            .get(country)
            .ok_or_else(|| Error::MissingCountry(country.to_string()))
    }
}
