/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * libm::log10(x)
}
