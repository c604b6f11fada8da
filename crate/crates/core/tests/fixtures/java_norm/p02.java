public class Account {
    private int balance;
    private String owner;

    public Account(int opening, String name) {
        this.balance = opening;
        this.owner = name;
    }

    public int getBalance() {
        return this.balance;
    }

    public String describe() {
        return owner + ":" + balance;
    }
}
