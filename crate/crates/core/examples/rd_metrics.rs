//! PSNR and BD-rate over two four-point rate-distortion curves.

use pcgft::metrics::{bd_rate, psnr, read_rd_csv_from, write_rd_csv_to, RdCurve, PEAK_8BIT};

fn main() -> pcgft::Result<()> {
    let reference = [52.0, 80.0, 121.0, 200.0];
    let decoded = [53.0, 79.0, 122.0, 199.0];
    println!("Y-PSNR {}", psnr(&reference, &decoded, PEAK_8BIT)?);
    println!("identical: {}", psnr(&reference, &reference, PEAK_8BIT)?);

    let anchor = RdCurve::from_pairs(&[(0.09, 27.3), (0.24, 30.8), (0.61, 34.1), (1.42, 37.6)])?;
    let test = RdCurve::from_pairs(&[(0.07, 27.9), (0.20, 31.5), (0.52, 34.9), (1.21, 38.2)])?;
    println!("BD-rate {:.3}%", bd_rate(&anchor, &test)?);
    println!("halved rates {:.3}%", bd_rate(&anchor, &anchor.scale_rates(0.5)?)?);

    let mut csv = Vec::new();
    write_rd_csv_to(&test, &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    assert_eq!(read_rd_csv_from(&csv[..])?, test);
    Ok(())
}
