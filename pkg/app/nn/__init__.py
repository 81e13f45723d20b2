# Dense networks with analytic gradients
