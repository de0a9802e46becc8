# Services package - simulation engines, experiments and checks
