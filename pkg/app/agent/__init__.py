# DDPG threshold learner
