#![allow(dead_code)]

use qrl_lake::lake::NUM_ACTIONS;
use qrl_lake::models::{Model, ModelSpec, PolicyValueModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst norm-wise relative error between the analytic gradient and central
/// differences of `L = c . logits + c_v V` over `draws` random
/// (parameters, state, upstream) triples.
pub fn worst_fd_error(spec: ModelSpec, draws: u64, h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let mut model = Model::init(spec, 1000 + draw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let state = rng.gen_range(0..16);
        let mut c = [0.0; NUM_ACTIONS];
        c.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        let cv: f64 = rng.gen_range(-1.0..1.0);
        let loss = |m: &Model| {
            let o = m.forward(state).unwrap();
            o.logits.iter().zip(&c).map(|(l, k)| l * k).sum::<f64>() + cv * o.value
        };
        let analytic = model.backward(state, &c, cv).unwrap();
        let mut num2 = 0.0;
        let mut err2 = 0.0;
        for i in 0..model.num_params() {
            let orig = model.params()[i];
            model.params_mut()[i] = orig + h;
            let up = loss(&model);
            model.params_mut()[i] = orig - h;
            let down = loss(&model);
            model.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            num2 += fd * fd;
            err2 += (fd - analytic[i]).powi(2);
        }
        worst = worst.max(err2.sqrt() / num2.sqrt().max(1e-12));
    }
    worst
}
