use crps_lam::domain::DomainSpec;
use crps_lam::toyatmos::{ToyDynamicsConfig, ToyWorld};

fn main() {
    let domain = DomainSpec::default();
    let cfg = ToyDynamicsConfig { num_steps: 10, ..ToyDynamicsConfig::default() };
    let world = ToyWorld::generate(cfg, &domain, 5).unwrap();
    let a = world.simulate_trajectory(&domain, 100, 1).unwrap();
    let b = world.simulate_trajectory(&domain, 100, 2).unwrap();
    // field std
    let s: Vec<f64> = a.states[8].data().iter().map(|v| *v as f64).collect();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64;
    println!("field std at t=8: {:.4}", var.sqrt());
    for t in 1..=10 {
        let ia = domain.crop_interior(&a.states[t]).unwrap();
        let ib = domain.crop_interior(&b.states[t]).unwrap();
        let errors: Vec<f64> = ia.data().iter().zip(ib.data()).map(|(x, y)| (*x - *y) as f64).collect();
        println!("t={t} rmse={:.4}", crps_lam::scoring::rmse(&errors).unwrap());
    }
}
