"""farfieldsv is a desk-scale toolkit for far-field speaker
verification. It covers the complete chain from audio to evaluated
scores:

    * acoustic front-ends: MFCC, PNCC, log Mel- and Gammatone-filterbank
      energies with sliding cepstral mean subtraction;

    * single-channel weighted prediction error (WPE) dereverberation;

    * i-vector extraction on a full-covariance GMM-UBM and a toy neural
      embedder trained with softmax or angular-margin softmax losses;

    * CORAL adaptation, whitening, length normalization, Gaussian PLDA
      and cosine scoring back-ends;

    * adaptive symmetric score normalization, scale-and-bias calibration
      and equal-weight fusion;

    * EER, minimum and actual detection cost, Cllr and DET curves;

    * image-source room impulse responses and additive noise to simulate
      far-field recordings.

The `fsv` command line program chains the stages into reproducible
experiments driven by a single JSON configuration.

"""

__version__ = "0.4.0"
