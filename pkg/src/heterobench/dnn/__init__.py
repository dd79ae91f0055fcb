"""DNN layer kernels with forward and backward passes."""

from heterobench.dnn.layers import (  # noqa: F401
    BatchNormState, ConvParams, DropoutMask, LrnParams,
    avgpool_backward, avgpool_forward, batchnorm_backward, batchnorm_forward,
    connected_backward, connected_forward, conv_backward, conv_forward,
    dropout_backward, dropout_forward, lrn_backward, lrn_forward,
    relu_backward, relu_forward, softmax_backward, softmax_forward,
)
