use super::loss::batch_mse_cosine;
use super::{adam_step, AdamState, Network};

/// Optimiser state for an encoder/decoder pair trained end to end on the
/// reconstruction loss.
pub(crate) struct AutoencoderTrainer {
    encoder: AdamState<f32>,
    decoder: AdamState<f32>,
    lr: f64,
}

impl AutoencoderTrainer {
    pub(crate) fn new(encoder: &Network<f32>, decoder: &Network<f32>, lr: f64) -> Self {
        Self {
            encoder: AdamState::for_params(&encoder.params()),
            decoder: AdamState::for_params(&decoder.params()),
            lr,
        }
    }

    /// One Adam step on `decoder(encoder(input))` against `target`; returns
    /// the batch-mean loss measured before the update.
    pub(crate) fn step(
        &mut self,
        encoder: &mut Network<f32>,
        decoder: &mut Network<f32>,
        input: &[f32],
        target: &[f32],
        batch: usize,
    ) -> f64 {
        let enc_trace = encoder.forward_traced(input, batch);
        let dec_trace = decoder.forward_traced(enc_trace.output(), batch);
        let width = decoder.output_shape().features();
        let (loss, grad) = batch_mse_cosine(dec_trace.output(), target, width);
        let dec_grads = decoder.backward_traced(&dec_trace, &grad, true);
        let code_grad = dec_grads.input.expect("requested input gradient");
        let enc_grads = encoder.backward_traced(&enc_trace, &code_grad, false);
        adam_step(&mut decoder.params_mut(), &dec_grads.params, &mut self.decoder, self.lr);
        adam_step(&mut encoder.params_mut(), &enc_grads.params, &mut self.encoder, self.lr);
        loss
    }
}
