use hke_core::{evaluate_envelopes, DerivedScalesF64, EnvelopeParams, EnvelopeVariant, ScaleFunctionF64};

fn main() -> hke_core::Result<()> {
    let psi = ScaleFunctionF64::from_catalog("stable:1.5")?;
    let ds = DerivedScalesF64::new(&psi, 1)?;
    println!("Φ(2) = {:.6}, Φ⁻¹(1) = {:.6}", ds.phi(2.0)?, ds.phi_inv(1.0)?);

    let params = EnvelopeParams::with_dim(1);
    for r in [0.0, 1.0, 4.0] {
        let e = evaluate_envelopes(&ds, &params, 1.0, r, EnvelopeVariant::Auto)?;
        println!("r = {r}: lower {:.4e}, upper {:.4e}", e.lower_basic, e.upper_exp);
    }
    Ok(())
}
