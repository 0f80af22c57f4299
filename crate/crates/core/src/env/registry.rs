use std::collections::BTreeMap;

use super::augment::Augmented;
use super::mountain_car::MountainCar;
use super::ou::OuWalker;
use super::pendulum::Pendulum;
use super::sokoban::Sokoban;
use super::tomato::TomatoWorld;
use super::vases::VaseWorld;
use super::{EnvConfig, Environment};
use crate::error::{Error, Result};

pub type EnvFactory = fn(&EnvConfig) -> Box<dyn Environment>;

/// Name → constructor table for environments.
#[derive(Clone)]
pub struct EnvRegistry {
    factories: BTreeMap<&'static str, EnvFactory>,
}

impl Default for EnvRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl EnvRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("vases", |c| Box::new(VaseWorld::new(c.vases.clone())));
        r.register("tomato", |c| Box::new(TomatoWorld::new(c.tomato.clone())));
        r.register("sokoban", |c| Box::new(Sokoban::new(c.sokoban.clone())));
        r.register("pendulum", |c| Box::new(Pendulum::new(c.pendulum.clone())));
        r.register("mountain_car", |c| {
            Box::new(MountainCar::new(c.mountain_car.clone()))
        });
        r.register("ou", |c| Box::new(OuWalker::new(c.ou.clone())));
        r
    }

    pub fn register(&mut self, name: &'static str, factory: EnvFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Build the environment named by `config.kind`, wrapping it with the
    /// configured observation augmentation.
    pub fn create(&self, config: &EnvConfig) -> Result<Box<dyn Environment>> {
        let factory = self
            .factories
            .get(config.kind.as_str())
            .ok_or_else(|| Error::UnknownEnv(config.kind.clone()))?;
        let env = factory(config);
        match config.augment {
            None => Ok(env),
            Some(kind) => {
                let cells = match config.kind.as_str() {
                    "vases" => config.vases.size * config.vases.size,
                    "tomato" => config.tomato.size * config.tomato.size,
                    "sokoban" => config.sokoban.size * config.sokoban.size,
                    other => {
                        return Err(Error::Config(format!(
                            "augmentation applies to gridworlds only, not `{other}`"
                        )))
                    }
                };
                Ok(Box::new(Augmented::new(env, kind, config.episode_len, cells)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::AugmentKind;

    #[test]
    fn builds_every_builtin() {
        let r = EnvRegistry::builtin();
        let dims: Vec<_> = r
            .names()
            .map(|n| (n, r.create(&EnvConfig::with_kind(n)).unwrap().obs_dim()))
            .collect();
        assert_eq!(
            dims,
            vec![
                ("mountain_car", 2),
                ("ou", 2),
                ("pendulum", 3),
                ("sokoban", 500),
                ("tomato", 98),
                ("vases", 147),
            ]
        );
    }

    #[test]
    fn unknown_and_bad_augmentation() {
        let r = EnvRegistry::builtin();
        assert!(matches!(
            r.create(&EnvConfig::with_kind("billiards")),
            Err(Error::UnknownEnv(_))
        ));
        let mut c = EnvConfig::with_kind("pendulum");
        c.augment = Some(AugmentKind::TvNoise);
        assert!(r.create(&c).is_err());
        c.kind = "vases".into();
        assert_eq!(r.create(&c).unwrap().obs_dim(), 196);
    }
}
