use ies_control::scheduler::{
    build_day_ahead, solve_day_ahead, DayAheadModel, LongTermInit, ScheduleConfig,
};
use ies_core::hybrid::assemble;
use ies_core::pipeline::{generate_scale_datasets, train_scale_models};
use ies_core::plant::PlantParams;
use ies_core::scenario::{generate, Template};
use ies_core::train::AdamConfig;
use ies_core::TimeScale;
use std::time::Instant;

fn main() {
    let p = PlantParams::default();
    let datasets = generate_scale_datasets(&p, TimeScale::LongTerm, 500, 0.02, 11).unwrap();
    let trained = train_scale_models(&datasets, &AdamConfig::default(), 11).unwrap();
    let models: Vec<_> = trained.into_iter().map(|(m, _)| m).collect();
    let net = assemble(TimeScale::LongTerm, models, p).unwrap();
    let scenario = generate(Template::SummerDay, 0.2, 0.08, 77).unwrap();
    let init = LongTermInit::nominal(&net.params);
    for nodes in [40usize, 150] {
        let config = ScheduleConfig {
            node_limit: nodes,
            ..Default::default()
        };
        let t0 = Instant::now();
        let built = build_day_ahead(&DayAheadModel::Relu(&net), &scenario, &init, &config).unwrap();
        match solve_day_ahead(&built) {
            Ok((plan, _)) => println!(
                "nodes {}: {:.1}s solve, {} pivots, obj {:.4}, gap {:.3}, closed {}, slack {:.2}, sum_yeb {:.1}",
                nodes,
                t0.elapsed().as_secs_f64(),
                plan.pivots,
                plan.objective,
                plan.gap,
                plan.gap_closed,
                plan.slack_total,
                plan.y_eb.iter().sum::<f64>()
            ),
            Err(e) => println!("nodes {nodes}: ERROR {e}"),
        }
    }
}
