//! The committed 2-input fixture network and its labelled sample.
//!
//! Two hidden layers of two neurons each and two outputs; on `[0, 1]^2`
//! every hidden neuron takes both phases.

use crate::data::{Dataset, InputDomain};
use crate::io::{parse_dataset, parse_model};
use crate::network::Network;

pub const MODEL_JSON: &str = include_str!("../../../fixtures/fixture_2x2.model.json");
pub const DATA_CSV: &str = include_str!("../../../fixtures/fixture_2x2.data.csv");
/// Class-0 NAP of the sample at `delta = 0.99`.
pub const CLASS0_NAP_JSON: &str = include_str!("../../../fixtures/fixture_2x2.class0.nap.json");

pub fn fixture_2x2() -> Network {
    parse_model(MODEL_JSON).expect("fixture model is valid")
}

pub fn fixture_2x2_data() -> Dataset {
    parse_dataset(DATA_CSV).expect("fixture data is valid")
}

pub fn fixture_domain() -> InputDomain {
    InputDomain::unit(2)
}
