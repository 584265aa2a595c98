//! Net-zero PV sizing and the storage device scaled from it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calendar::{HourlySeries, Unit};
use crate::error::{Error, Result};

pub const INVERTER_EFFICIENCY: f64 = 0.92;
pub const ROUND_TRIP_EFFICIENCY: f64 = 0.92;
pub const DAILY_SELF_DISCHARGE_RETENTION: f64 = 0.95;
/// Reference unit: 5 kW sustained rate per 13.5 kWh usable capacity.
pub const RATE_PER_KWH: f64 = 5.0 / 13.5;

/// PV size and storage device for one household (or an aggregate of them).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Net-zero PV size, kW.
    pub pv_kw: f64,
    /// Usable storage capacity, kWh.
    pub capacity_kwh: f64,
    /// Max energy charged per hour, kWh.
    pub max_charge: f64,
    /// Max energy discharged per hour, kWh.
    pub max_discharge: f64,
    pub eta_inverter: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    /// Fraction of stored energy retained after one hour.
    pub eta_retention: f64,
}

impl DeviceSpec {
    /// Device with zero PV and zero storage; dispatch degenerates to the
    /// no-technology bill.
    pub fn none() -> Self {
        DeviceSpec {
            pv_kw: 0.0,
            capacity_kwh: 0.0,
            max_charge: 0.0,
            max_discharge: 0.0,
            ..make_device(1.0).expect("positive size")
        }
    }

    /// All efficiencies equal to one; handy for hand-checkable instances.
    pub fn ideal(capacity_kwh: f64, rate: f64) -> Self {
        DeviceSpec {
            pv_kw: capacity_kwh,
            capacity_kwh,
            max_charge: rate,
            max_discharge: rate,
            eta_inverter: 1.0,
            eta_charge: 1.0,
            eta_discharge: 1.0,
            eta_retention: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.pv_kw, self.capacity_kwh, self.max_charge, self.max_discharge];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("device sizes must be finite and nonnegative: {self:?}")));
        }
        let effs = [self.eta_inverter, self.eta_charge, self.eta_discharge, self.eta_retention];
        if effs.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::invalid(format!("efficiencies must lie in (0, 1]: {self:?}")));
        }
        Ok(())
    }

    /// Sum sizes over a set of devices sharing the same efficiencies.
    pub fn aggregate<'a>(devices: impl IntoIterator<Item = &'a DeviceSpec>, template: &DeviceSpec) -> Self {
        let mut out = DeviceSpec {
            pv_kw: 0.0,
            capacity_kwh: 0.0,
            max_charge: 0.0,
            max_discharge: 0.0,
            ..*template
        };
        for d in devices {
            out.pv_kw += d.pv_kw;
            out.capacity_kwh += d.capacity_kwh;
            out.max_charge += d.max_charge;
            out.max_discharge += d.max_discharge;
        }
        out
    }
}

/// Size PV so annual AC output equals annual load: z = sum(L) / (eta_I sum(V)).
pub fn net_zero_size(load: &HourlySeries, irradiance: &HourlySeries, eta_inverter: f64) -> Result<f64> {
    if load.len() != irradiance.len() {
        return Err(Error::LengthMismatch { expected: load.len(), got: irradiance.len() });
    }
    let (sl, sv) = (load.total(), irradiance.total());
    if sv <= 0.0 {
        return Err(Error::invalid("irradiance total is zero"));
    }
    if sl <= 0.0 {
        return Err(Error::invalid("load total is zero"));
    }
    Ok(sl / (eta_inverter * sv))
}

/// Storage sized at 1 kWh per kW of PV with the reference power ratio.
pub fn make_device(pv_kw: f64) -> Result<DeviceSpec> {
    if !(pv_kw.is_finite() && pv_kw > 0.0) {
        return Err(Error::invalid(format!("PV size must be positive, got {pv_kw}")));
    }
    let eta = ROUND_TRIP_EFFICIENCY.sqrt();
    Ok(DeviceSpec {
        pv_kw,
        capacity_kwh: pv_kw,
        max_charge: pv_kw * RATE_PER_KWH,
        max_discharge: pv_kw * RATE_PER_KWH,
        eta_inverter: INVERTER_EFFICIENCY,
        eta_charge: eta,
        eta_discharge: eta,
        eta_retention: DAILY_SELF_DISCHARGE_RETENTION.powf(1.0 / 24.0),
    })
}

/// DC-side PV energy, `E = z V`.
pub fn pv_generation(pv_kw: f64, irradiance: &HourlySeries) -> Result<HourlySeries> {
    if !(pv_kw.is_finite() && pv_kw >= 0.0) {
        return Err(Error::invalid(format!("PV size must be nonnegative, got {pv_kw}")));
    }
    HourlySeries::new(Unit::Kwh, irradiance.values().iter().map(|v| pv_kw * v).collect())
}

/// Write `household_id,z_kw,capacity_kwh,rate_kw` rows.
pub fn write_sizing_audit<W: Write>(w: W, rows: &[(String, DeviceSpec)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["household_id", "z_kw", "capacity_kwh", "rate_kw"])?;
    for (id, d) in rows {
        wtr.write_record([
            id.as_str(),
            &d.pv_kw.to_string(),
            &d.capacity_kwh.to_string(),
            &d.max_charge.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<sizing audit>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(unit: Unit, total: f64) -> HourlySeries {
        HourlySeries::new(unit, vec![total / 48.0; 48]).unwrap()
    }

    #[test]
    fn sizing_arithmetic() {
        let z = net_zero_size(&series(Unit::Kwh, 920.0), &series(Unit::KwhPerM2, 1000.0), 0.92).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
        let z = net_zero_size(&series(Unit::Kwh, 4600.0), &series(Unit::KwhPerM2, 2000.0), 0.92).unwrap();
        assert!((z - 2.5).abs() < 1e-12);
        assert!(net_zero_size(&series(Unit::Kwh, 1.0), &series(Unit::KwhPerM2, 0.0), 0.92).is_err());
    }

    #[test]
    fn device_scaling() {
        let d = make_device(13.5).unwrap();
        assert!((d.max_charge - 5.0).abs() < 1e-12);
        assert!((d.max_discharge - 5.0).abs() < 1e-12);
        let d = make_device(5.0).unwrap();
        assert_eq!(d.capacity_kwh, 5.0);
        assert!((d.max_charge - 1.851_851_851_851_852).abs() < 1e-12);
        assert!((d.eta_charge * d.eta_discharge - 0.92).abs() < 1e-12);
        assert!((d.eta_charge - 0.959).abs() < 1e-3);
        assert!((d.eta_retention.powi(24) - 0.95).abs() < 1e-12);
        assert!((d.eta_retention - 0.99787).abs() < 1e-5);
        assert!(make_device(0.0).is_err());
        assert!(make_device(-1.0).is_err());
        d.validate().unwrap();
    }

    #[test]
    fn generation() {
        let v = HourlySeries::new(Unit::KwhPerM2, vec![0.5; 24]).unwrap();
        assert!(pv_generation(2.0, &v).unwrap().values().iter().all(|x| *x == 1.0));
        assert!(pv_generation(0.0, &v).unwrap().values().iter().all(|x| *x == 0.0));
    }

    proptest::proptest! {
        #[test]
        fn net_zero_identity(load in proptest::collection::vec(0.0f64..5.0, 48), irr in proptest::collection::vec(0.01f64..1.0, 48)) {
            let l = HourlySeries::new(Unit::Kwh, load).unwrap();
            proptest::prop_assume!(l.total() > 0.0);
            let v = HourlySeries::new(Unit::KwhPerM2, irr).unwrap();
            let z = net_zero_size(&l, &v, INVERTER_EFFICIENCY).unwrap();
            let ac = INVERTER_EFFICIENCY * pv_generation(z, &v).unwrap().total();
            proptest::prop_assert!(((l.total() - ac) / l.total()).abs() < 1e-9);
        }
    }
}
