from Gradient_Reversal_Adaptation.Experiments.Cli import run

if __name__ == "__main__":
    run()
