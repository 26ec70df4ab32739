use super::{sigmoid, FuzzyBackend, Truth};

/// Forward-mode dual number carrying partial derivatives with respect to `N`
/// parameters. Parameter `i`'s partial lives at index `i`; parameters that do
/// not influence the value have partial 0.
///
/// Non-smooth points follow one convention throughout: `min`/`max` take the
/// gradient of the operand that attains the result, and on ties the left
/// operand wins. Clamps are written as `max(0, x)` / `min(1, x)`, so at a
/// clamp boundary the constant side wins and the gradient is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub value: f64,
    pub partials: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            partials: [0.0; N],
        }
    }

    /// An independent variable with unit partial at `index`.
    pub fn variable(value: f64, index: usize) -> Self {
        let mut partials = [0.0; N];
        partials[index] = 1.0;
        Self { value, partials }
    }

    pub fn partial(&self, index: usize) -> f64 {
        self.partials.get(index).copied().unwrap_or(0.0)
    }

    fn map(self, value: f64, scale: f64) -> Self {
        let mut partials = self.partials;
        for p in &mut partials {
            *p *= scale;
        }
        Self { value, partials }
    }

    fn combine(value: f64, a: &Self, da: f64, b: &Self, db: f64) -> Self {
        let mut partials = [0.0; N];
        for (i, p) in partials.iter_mut().enumerate() {
            *p = da * a.partials[i] + db * b.partials[i];
        }
        Self { value, partials }
    }

    pub fn ln(self) -> Self {
        self.map(self.value.ln(), 1.0 / self.value)
    }

    pub fn scale(self, k: f64) -> Self {
        self.map(self.value * k, k)
    }

    pub fn min(self, rhs: Self) -> Self {
        if self.value <= rhs.value {
            self
        } else {
            rhs
        }
    }

    pub fn max(self, rhs: Self) -> Self {
        if self.value >= rhs.value {
            self
        } else {
            rhs
        }
    }
}

impl<const N: usize> std::ops::Add for Dual<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::combine(self.value + rhs.value, &self, 1.0, &rhs, 1.0)
    }
}

impl<const N: usize> std::ops::Sub for Dual<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::combine(self.value - rhs.value, &self, 1.0, &rhs, -1.0)
    }
}

impl<const N: usize> std::ops::Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let v = self.value / rhs.value;
        Self::combine(v, &self, 1.0 / rhs.value, &rhs, -v / rhs.value)
    }
}

impl<const N: usize> Truth for Dual<N> {
    fn constant(v: f64) -> Self {
        Dual::constant(v)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn and(self, b: Self, backend: FuzzyBackend) -> Self {
        match backend {
            FuzzyBackend::Godel => self.min(b),
            FuzzyBackend::Product => self.mul(b),
            FuzzyBackend::Lukasiewicz => {
                Dual::constant(0.0).max(self + b - Dual::constant(1.0))
            }
        }
    }

    fn or(self, b: Self, backend: FuzzyBackend) -> Self {
        match backend {
            FuzzyBackend::Godel => self.max(b),
            FuzzyBackend::Product => self + b - self.mul(b),
            FuzzyBackend::Lukasiewicz => Dual::constant(1.0).min(self + b),
        }
    }

    fn not(self) -> Self {
        self.map(1.0 - self.value, -1.0)
    }

    fn implies(self, b: Self, backend: FuzzyBackend) -> Self {
        match backend {
            FuzzyBackend::Godel => {
                if self.value <= b.value {
                    Dual::constant(1.0)
                } else {
                    b
                }
            }
            FuzzyBackend::Product => {
                if self.value == 0.0 {
                    Dual::constant(1.0)
                } else {
                    Dual::constant(1.0).min(b / self)
                }
            }
            FuzzyBackend::Lukasiewicz => {
                Dual::constant(1.0).min(Dual::constant(1.0) - self + b)
            }
        }
    }

    fn mul(self, b: Self) -> Self {
        Self::combine(self.value * b.value, &self, b.value, &b, self.value)
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid(self.value);
        self.map(s, s * (1.0 - s))
    }
}
