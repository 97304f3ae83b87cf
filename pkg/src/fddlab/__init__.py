"""fddlab: desk-scale fault detection and diagnosis workbench.

Vibration bursts in, diagnosis quality out: minority-class augmentation with
a gradient-penalty Wasserstein GAN, FFT+wavelet feature tensors, a dual-path
conv/LSTM feature extractor, a closed-form weighted extreme learning machine
classifier, and an imbalance x noise experiment harness.
"""

__version__ = "0.1.0"
