// Micro-timing of the hot ops at training shapes.
use autodiff::Tensor;
use std::time::Instant;

fn timeit<F: FnMut()>(name: &str, mut f: F) {
    let t0 = Instant::now();
    f();
    println!("{name}: {:?}", t0.elapsed());
}

fn main() {
    let frames = 192usize;
    let mk = |shape: Vec<usize>| {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|i| ((i * 37 % 97) as f32) * 0.01 - 0.3).collect();
        Tensor::param(shape, data).unwrap()
    };
    // stem: 12->8 @64x44
    let x0 = mk(vec![frames, 12, 64, 44]);
    let w0 = mk(vec![8, 12, 3, 3]);
    timeit("stem fwd", || { let _ = x0.conv2d(&w0, 1, 1).unwrap(); });
    timeit("stem fwd+bwd", || {
        let y = x0.conv2d(&w0, 1, 1).unwrap();
        y.sum_all().backward().unwrap();
    });
    // stage2 conv2: 16->16 @64x44
    let x2 = mk(vec![frames, 16, 64, 44]);
    let w2 = mk(vec![16, 16, 3, 3]);
    timeit("s2 conv fwd", || { let _ = x2.conv2d(&w2, 1, 1).unwrap(); });
    timeit("s2 conv fwd+bwd", || {
        let y = x2.conv2d(&w2, 1, 1).unwrap();
        y.sum_all().backward().unwrap();
    });
    // stage4 conv2: 64->64 @16x11
    let x4 = mk(vec![frames, 64, 16, 11]);
    let w4 = mk(vec![64, 64, 3, 3]);
    timeit("s4 conv fwd+bwd", || {
        let y = x4.conv2d(&w4, 1, 1).unwrap();
        y.sum_all().backward().unwrap();
    });
    // batch norm at stage2 size
    let gamma = mk(vec![16]); let beta = mk(vec![16]);
    let running = autodiff::RunningStats::<f32>::new(16);
    timeit("bn s2 fwd+bwd", || {
        let y = x2.batch_norm(&gamma, &beta, &running, true, 0.1, 1e-5).unwrap();
        y.sum_all().backward().unwrap();
    });
    timeit("relu s2 fwd+bwd", || {
        let y = x2.relu();
        y.sum_all().backward().unwrap();
    });
    timeit("add s2 fwd+bwd", || {
        let y = x2.add(&x2).unwrap();
        y.sum_all().backward().unwrap();
    });
    // blend at stage4 size
    let mask = Tensor::from_vec(vec![frames, 16, 11], vec![1.0f32; frames*176]).unwrap();
    let g = Tensor::scalar(0.75f32);
    timeit("blend+pool x5 fwd+bwd", || {
        let mut outs = Vec::new();
        for _ in 0..5 {
            let b = x4.regional_blend(&mask, &g).unwrap();
            let f = b.reshape(vec![frames, 64, 176]).unwrap();
            outs.push(f.max_over(2).unwrap().add(&f.mean_over(2).unwrap()).unwrap());
        }
        let refs: Vec<&Tensor<f32>> = outs.iter().collect();
        Tensor::concat(&refs, 0).unwrap().sum_all().backward().unwrap();
    });
}
