//! Supervised models over predictor sets: ridge logistic regression, least
//! squares, kernel Naive Bayes and the score ensemble.

mod cv;
mod linear;
pub(crate) mod logistic;
mod nb;
mod predictors;
mod screen;

pub use cv::{
    out_of_fold_logistic, select_lambda, stratified_folds, LambdaScore, LambdaSelection, DEFAULT_FOLDS, LAMBDA_GRID,
};
pub use linear::{fit_linear, predict_linear, r_squared, rmse, LinearModel};
pub use logistic::{
    fit_logistic, gradient as logistic_gradient, objective as logistic_objective, predict_proba, LogisticModel,
};
pub use nb::{
    ensemble_naive_bayes, fit_kernel_nb, nb_class_posteriors, nb_posterior, nb_predict, silverman_bandwidth, Kde,
    KernelNaiveBayes,
};
pub use predictors::{
    fit_predictor_set, labelled_rows, Design, FitOptions, FittedPredictor, PredictorGroup, PredictorSet,
};
pub use screen::{predictability_screen, regression_screen, RegressionRow, ScreenOptions, ScreenRow, ScreenStatus};
