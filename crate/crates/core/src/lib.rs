pub mod aperture;
pub mod config;
pub mod green;
pub mod imaging;
pub mod lorentzian;
pub mod output;
pub mod quadrature;
pub mod resonance;
pub mod runner;
pub mod signal;
pub mod system;
pub mod validation;
