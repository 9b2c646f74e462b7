// SPDX-License-Identifier: Apache-2.0

//! Per-inference SDC thresholds for each ASIL level and MAC configuration.

use npu_sdc::reliability::{asil_threshold, meets_asil, published_target, AsilLevel, MacConfig, PUBLISHED_AREA_FRACTION};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<8}{:>10}{:>14}{:>14}{:>14}", "config", "area", "ASIL-B", "ASIL-C", "ASIL-D");
    for mac in MacConfig::ALL {
        let frac = PUBLISHED_AREA_FRACTION[mac.index()];
        let mut row = format!("{mac:<8}{frac:>10}");
        for level in [AsilLevel::B, AsilLevel::C] {
            row += &format!("{:>14.3e}", asil_threshold(level, frac, 0.3e-3)?.threshold_per_inference);
        }
        let d = published_target(mac, AsilLevel::D);
        row += &format!("{:>14.3e}", d.threshold_per_inference);
        println!("{row}");
    }
    let d = published_target(MacConfig::Mac32, AsilLevel::D);
    println!("0.9e-16 meets {}: {}", d.level, meets_asil(0.9e-16, &d));
    println!("1.0e-16 meets {}: {}", d.level, meets_asil(1.0e-16, &d));
    Ok(())
}
