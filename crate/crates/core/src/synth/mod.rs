//! Synthetic run-to-failure fleets with multiphase flights.
//!
//! All constants here are synthetic choices; they do not model any real
//! engine. The generator only has to produce the structure the methods rely
//! on: flight classes with different phase mixes and operating envelopes, and
//! a monotone health decline that shows up in the sensors.

mod fleet;
mod flight;
mod unit;

pub use fleet::{gen_fleet, write_fleet, Fleet, FleetSpec};
pub use flight::{gen_flight, gen_flight_with, FlightClass, FlightClassSpec, FlightProfile, Range};
pub use unit::{
    gen_unit, gen_unit_with, isa, recorded_cycles, sensor_model, DegradationSpec, GeneratedUnit, HealthModel,
    NUM_SENSORS,
};
