use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cones::{Bundle, SplittingFrame};
use crate::error::{Error, Result};
use crate::torus::TorusPoint;

/// Which bundle a patch is a graph over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Graph of `h: E^cu -> E^cs`.
    CuGraph,
    /// Graph of `h: E^cs -> E^cu`.
    CsGraph,
}

impl Flavor {
    pub fn domain(self) -> Bundle {
        match self {
            Flavor::CuGraph => Bundle::CenterUnstable,
            Flavor::CsGraph => Bundle::CenterStable,
        }
    }

    pub fn swapped(self) -> Flavor {
        match self {
            Flavor::CuGraph => Flavor::CsGraph,
            Flavor::CsGraph => Flavor::CuGraph,
        }
    }
}

/// The graph `{ x + D xi + C h(xi) : |xi|_inf <= radius }` of a function
/// sampled on a regular `m^d` lattice and interpolated multilinearly, where
/// `D` and `C` are the domain and complementary bases of `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPatch {
    frame: SplittingFrame,
    flavor: Flavor,
    radius: f64,
    resolution: usize,
    values: Vec<f64>,
    k_bound: f64,
}

impl PartialEq for SplittingFrame {
    fn eq(&self, other: &Self) -> bool {
        self.point() == other.point() && self.cs() == other.cs() && self.cu() == other.cu()
    }
}

/// Default lattice size per axis.
pub const DEFAULT_RESOLUTION: usize = 33;

impl GraphPatch {
    /// Samples `h` on the lattice; `h(0)` must vanish.
    pub fn from_fn(
        frame: SplittingFrame,
        flavor: Flavor,
        radius: f64,
        resolution: usize,
        h: impl Fn(&DVector<f64>) -> DVector<f64>,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter { name: "radius", reason: format!("must be positive, got {radius}") });
        }
        if resolution < 3 || resolution % 2 == 0 {
            return Err(Error::Parameter { name: "resolution", reason: format!("must be odd and at least 3, got {resolution}") });
        }
        let d = frame.bundle(flavor.domain()).ncols();
        let c = frame.bundle(flavor.domain().other()).ncols();
        let nodes = resolution.checked_pow(d as u32).ok_or(Error::Parameter { name: "resolution", reason: "lattice too large".into() })?;
        let mut values = Vec::with_capacity(nodes * c);
        let mut patch = Self { frame, flavor, radius, resolution, values: Vec::new(), k_bound: 0.0 };
        for i in 0..nodes {
            let v = h(&patch.node_coords(i));
            if v.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: v.len() });
            }
            values.extend(v.iter());
        }
        patch.set_values(values)?;
        Ok(patch)
    }

    pub fn zero(frame: SplittingFrame, flavor: Flavor, radius: f64, resolution: usize) -> Result<Self> {
        let c = frame.bundle(flavor.domain().other()).ncols();
        Self::from_fn(frame, flavor, radius, resolution, |_| DVector::zeros(c))
    }

    fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        self.values = values;
        self.k_bound = self.derivative_bound();
        Ok(())
    }

    pub(crate) fn with_values(&self, frame: SplittingFrame, radius: f64, values: Vec<f64>) -> Result<Self> {
        let mut p = Self { frame, flavor: self.flavor, radius, resolution: self.resolution, values: Vec::new(), k_bound: 0.0 };
        p.set_values(values)?;
        Ok(p)
    }

    pub fn base_point(&self) -> &TorusPoint {
        self.frame.point()
    }

    pub fn frame(&self) -> &SplittingFrame {
        &self.frame
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Largest finite-difference derivative norm over the lattice.
    pub fn k_bound(&self) -> f64 {
        self.k_bound
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_basis().ncols()
    }

    pub fn codim(&self) -> usize {
        self.complement_basis().ncols()
    }

    pub fn domain_basis(&self) -> &DMatrix<f64> {
        self.frame.bundle(self.flavor.domain())
    }

    pub fn complement_basis(&self) -> &DMatrix<f64> {
        self.frame.bundle(self.flavor.domain().other())
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.domain_dim() as u32)
    }

    fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.resolution - 1) as f64
    }

    fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let d = self.domain_dim();
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = i % self.resolution;
            i /= self.resolution;
        }
        idx
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &v| acc * self.resolution + v)
    }

    pub fn node_coords(&self, i: usize) -> DVector<f64> {
        let h = self.spacing();
        DVector::from_iterator(self.domain_dim(), self.multi_index(i).into_iter().map(|v| -self.radius + h * v as f64))
    }

    pub fn node_value(&self, i: usize) -> DVector<f64> {
        let c = self.codim();
        DVector::from_column_slice(&self.values[i * c..(i + 1) * c])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether `xi` lies in the domain cube (with a relative slack of `1e-12`).
    pub fn contains(&self, xi: &DVector<f64>) -> bool {
        xi.amax() <= self.radius * (1.0 + 1e-12)
    }

    /// Multilinear interpolation of `h`; `None` outside the domain.
    pub fn eval(&self, xi: &DVector<f64>) -> Option<DVector<f64>> {
        if !self.contains(xi) {
            return None;
        }
        let d = self.domain_dim();
        let c = self.codim();
        let h = self.spacing();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let t = ((xi[a] + self.radius) / h).clamp(0.0, (self.resolution - 1) as f64);
            let cell = (t.floor() as usize).min(self.resolution - 2);
            base[a] = cell;
            frac[a] = t - cell as f64;
        }
        let mut out = DVector::zeros(c);
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let k = self.flat_index(&idx);
            for j in 0..c {
                out[j] += w * self.values[k * c + j];
            }
        }
        Some(out)
    }

    /// Offset from the base point of the graph point over `xi`.
    pub fn offset(&self, xi: &DVector<f64>) -> Option<DVector<f64>> {
        let v = self.eval(xi)?;
        Some(self.domain_basis() * xi + self.complement_basis() * v)
    }

    pub fn point(&self, xi: &DVector<f64>) -> Option<TorusPoint> {
        Some(self.base_point().translate(&self.offset(xi)?))
    }

    fn derivative_bound(&self) -> f64 {
        let d = self.domain_dim();
        let c = self.codim();
        if d == 0 || c == 0 {
            return 0.0;
        }
        let h = self.spacing();
        let mut worst: f64 = 0.0;
        let mut jac = DMatrix::zeros(c, d);
        for i in 0..self.node_count() {
            let idx = self.multi_index(i);
            for a in 0..d {
                let mut lo = idx.clone();
                let mut hi = idx.clone();
                if idx[a] + 1 < self.resolution {
                    hi[a] += 1;
                } else {
                    lo[a] -= 1;
                }
                let (kl, kh) = (self.flat_index(&lo), self.flat_index(&hi));
                for j in 0..c {
                    jac[(j, a)] = (self.values[kh * c + j] - self.values[kl * c + j]) / h;
                }
            }
            let norm = if c == 1 || d == 1 { jac.norm() } else { jac.clone().svd(false, false).singular_values.max() };
            worst = worst.max(norm);
        }
        worst
    }

    /// Largest difference of the two graphs over the lattice of `self`,
    /// restricted to the common domain.
    pub fn sup_distance(&self, other: &GraphPatch) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.node_count() {
            let xi = self.node_coords(i);
            if let (Some(a), Some(b)) = (self.eval(&xi), other.eval(&xi)) {
                worst = worst.max((a - b).amax());
            }
        }
        worst
    }

    /// CSV with one row per lattice node: domain coordinates, graph values and
    /// the torus point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.domain_dim()).map(|a| format!("xi{a}")).collect();
        header.extend((0..self.codim()).map(|j| format!("h{j}")));
        header.extend((0..self.base_point().dim()).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.node_count() {
            let xi = self.node_coords(i);
            let mut row: Vec<String> = xi.iter().map(|v| format!("{v:e}")).collect();
            row.extend(self.node_value(i).iter().map(|v| format!("{v:e}")));
            let p = self.point(&xi).expect("lattice nodes lie in the domain");
            row.extend(p.as_slice().iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Little-endian binary image that restores every float exactly.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.base_point().dim();
        out.write_all(MAGIC)?;
        out.write_all(&(n as u32).to_le_bytes())?;
        out.write_all(&(self.frame.cs().ncols() as u32).to_le_bytes())?;
        out.write_all(&[match self.flavor {
            Flavor::CuGraph => 0u8,
            Flavor::CsGraph => 1u8,
        }])?;
        out.write_all(&(self.resolution as u32).to_le_bytes())?;
        let mut floats: Vec<f64> = vec![self.radius, self.frame.convergence];
        floats.extend(self.base_point().as_slice());
        floats.extend(self.frame.cs().iter());
        floats.extend(self.frame.cu().iter());
        floats.extend(&self.values);
        out.write_all(&(floats.len() as u64).to_le_bytes())?;
        for v in floats {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a graph patch file".into()));
        }
        let mut u32buf = [0u8; 4];
        let mut read_u32 = |input: &mut R| -> Result<usize> {
            input.read_exact(&mut u32buf)?;
            Ok(u32::from_le_bytes(u32buf) as usize)
        };
        let n = read_u32(&mut input)?;
        let s = read_u32(&mut input)?;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let flavor = match flag[0] {
            0 => Flavor::CuGraph,
            1 => Flavor::CsGraph,
            f => return Err(Error::Parse(format!("unknown patch flavor {f}"))),
        };
        let resolution = read_u32(&mut input)?;
        let mut u64buf = [0u8; 8];
        input.read_exact(&mut u64buf)?;
        let count = u64::from_le_bytes(u64buf) as usize;
        if s > n || count < 2 + n + n * n {
            return Err(Error::Parse("inconsistent patch header".into()));
        }
        let mut floats = Vec::with_capacity(count);
        for _ in 0..count {
            input.read_exact(&mut u64buf)?;
            floats.push(f64::from_le_bytes(u64buf));
        }
        let radius = floats[0];
        let convergence = floats[1];
        let point = TorusPoint::new(floats[2..2 + n].to_vec())?;
        let mut at = 2 + n;
        let cs = DMatrix::from_column_slice(n, s, &floats[at..at + n * s]);
        at += n * s;
        let cu = DMatrix::from_column_slice(n, n - s, &floats[at..at + n * (n - s)]);
        at += n * (n - s);
        let mut frame = SplittingFrame::from_orthonormal(point, cs, cu)?;
        frame.convergence = convergence;
        let template = Self { frame: frame.clone(), flavor, radius, resolution, values: Vec::new(), k_bound: 0.0 };
        if floats.len() - at != template.node_count() * template.codim() {
            return Err(Error::Parse("patch value count does not match the lattice".into()));
        }
        template.with_values(frame, radius, floats[at..].to_vec())
    }
}

const MAGIC: &[u8; 8] = b"TLPATCH1";

impl GraphPatch {
    /// The same values read against another frame and flavor.
    pub(crate) fn with_frame(&self, frame: SplittingFrame, flavor: Flavor) -> GraphPatch {
        GraphPatch { frame, flavor, ..self.clone() }
    }
}
