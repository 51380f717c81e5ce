//! The 36 projections of two-photon tomography and the waveplate angles that
//! realise each single-photon projector in front of an H polarizer.

use cascade_tomo::optics::{projector_for, tomography_bases, waveplate_setting_for, PolarizationBasis};

fn main() -> cascade_tomo::Result<()> {
    use PolarizationBasis::*;
    println!("{:>5} {:>9} {:>9} {:>18}", "basis", "qwp_deg", "hwp_deg", "|<target|setting>|²");
    for b in [H, V, D, A, R, L] {
        let s = waveplate_setting_for(b);
        let overlap = projector_for(b).inner(&s.projected_state()).norm_sqr();
        println!(
            "{:>5} {:>9.2} {:>9.2} {:>18.12}",
            b.label(),
            s.qwp_angle().to_degrees(),
            s.hwp_angle().to_degrees(),
            overlap
        );
    }
    let pairs = tomography_bases(36)?;
    let labels: Vec<String> = pairs.iter().map(|p| p.to_string()).collect();
    println!("{} projections: {}", pairs.len(), labels.join(" "));
    Ok(())
}
